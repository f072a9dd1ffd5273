#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gridshare/types.hpp"

namespace gridshare {

enum class ProductType {
    Combined,
    Fixed,
    GeneralService,
    Spot,
};

std::string_view to_string(ProductType p);
ProductType parse_product_type(std::string_view token);

/// One client (an aggregated microgrid) with hourly consumption and
/// production series aligned to a horizon. Points absent from the input are
/// NaN until fill_missing() zeroes them.
struct ClientRecord {
    std::string client_id;
    std::string county_id;
    bool is_business = false;
    ProductType product_type = ProductType::Combined;
    int eic_count = 1;
    double pv_capacity_kw = 0.0; // informational only
    std::vector<double> consumption_kwh;
    std::vector<double> production_kwh;
};

/// A set of clients that trade with each other. Members are indices into the
/// client list, kept in dataset order.
struct MarketGroup {
    std::string group_id;
    std::vector<std::size_t> members;
};

/// Parse "YYYY-MM-DD[T ]HH:MM[:SS]" into hours since the Unix epoch. The
/// timestamp must lie exactly on an hour. All timestamps share one fixed
/// timezone; no conversions are applied.
std::int64_t parse_epoch_hour(std::string_view timestamp);

/// Inverse of parse_epoch_hour, "YYYY-MM-DDTHH:00:00".
std::string format_epoch_hour(std::int64_t hour);

/// Scan a dataset CSV and return the horizon spanning its timestamps
/// (min..max hour, inclusive). Empty input yields steps == 0.
Horizon detect_horizon(const std::string& path);

/// Load the dataset CSV. Expected header:
///   client_id,county_id,is_business,product_type,eic_count,pv_capacity_kw,
///   timestamp,consumption_kwh,production_kwh
/// One row per client per hour; rows outside the horizon are dropped. Clients
/// appear in order of first appearance. Empty value cells become NaN.
/// Throws ParseError (malformed rows, with line number) or DataError
/// (duplicate client/timestep, unknown product type, negative values,
/// inconsistent client metadata).
std::vector<ClientRecord> load_clients(const std::string& path, const Horizon& horizon);
std::vector<ClientRecord> load_clients(std::istream& in, const Horizon& horizon,
                                       const std::string& source_name = "<stream>");

/// Replace every absent (NaN) point with 0 and size both series to
/// horizon.steps. Present values are unchanged. Idempotent.
ClientRecord fill_missing(ClientRecord record, const Horizon& horizon);

/// Deterministic battery capacity: u ~ Uniform[5, 20) kWh drawn from a stream
/// seeded by (rng_seed, client_id), scaled by the client's EIC count. Pure
/// function of its arguments; unaffected by other clients or call order.
double assign_battery_capacity(const ClientRecord& record, std::uint64_t rng_seed);

/// Group clients for a scenario: one group per county (ordered by first
/// appearance) or a single "all" group.
std::vector<MarketGroup> partition(const std::vector<ClientRecord>& clients, Scenario scenario);

/// production[t] - consumption[t]. Positive is surplus. Requires a cleaned
/// record (see fill_missing). Throws std::out_of_range past the series end.
double net_energy(const ClientRecord& record, std::size_t t);

} // namespace gridshare
