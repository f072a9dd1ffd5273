#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridshare/dataset.hpp"
#include "gridshare/types.hpp"

namespace gridshare {

/// Full description of one simulation run. Defaults mirror the standard
/// experiment: eta 0.5, expiry 12 steps, 10% fee, 10,000 EUR trading funds,
/// constant utility price 0.163 EUR/kWh with a floor of a third of that.
struct RunConfig {
    Scenario scenario = Scenario::AcrossCounties;
    Strategy strategy = Strategy::Trading;

    double usable_fraction = 0.5;  // eta: delivered share of each sharing match
    std::size_t expiry_steps = 12; // tau: usable lifetime of a parked share
    double fee_rate = 0.10;        // charged on centralized-scheme trades only
    double initial_balance_eur = 10000.0;

    double utility_price_eur_kwh = 0.163;
    std::vector<double> utility_price_series; // optional per-step override

    /// Feed-in floor under the dynamic price: utility_t / 3 unless a constant
    /// is given.
    std::optional<double> fit_floor_eur_kwh;

    /// Rate paid for energy sold back to the grid in the post-run settlement:
    /// mean cleared price / 3 unless a constant is given.
    std::optional<double> settlement_fit_eur_kwh;

    std::uint64_t rng_seed = 42;

    /// Steps to simulate; 0 means the full series. The series may be longer,
    /// the tail then only feeds the foresight window.
    std::size_t horizon_steps = 0;

    bool collect_trade_log = false;
    bool collect_flow_trace = false;
};

/// Aggregated outcomes for one group (or the cross-group average).
/// Energy in kWh, money in EUR.
struct MetricsRow {
    std::string group_id;
    double energy_from_grid_kwh = 0.0;
    double paid_to_grid_eur = 0.0;
    double p2p_traded_kwh = 0.0;
    double earned_from_p2p_eur = 0.0;
    double wasted_kwh = 0.0; // surplus sold back to the grid
    double shared_kwh = 0.0; // total matched share quantity
    double stored_share_kwh = 0.0;
    double resold_share_kwh = 0.0;
    double reclaimed_share_kwh = 0.0;
    double released_share_kwh = 0.0; // expired into host batteries
    double leftover_share_kwh = 0.0; // still live at the end of the run
    double earned_from_sharing_eur = 0.0;
    /// 100 * (1 - (released + leftover) / stored); empty when nothing stored.
    std::optional<double> pct_sold_or_reused;
    double mean_price_eur_kwh = 0.0;
    double settlement_fit_eur_kwh = 0.0;
    /// paid_to_grid - earned_from_p2p - earned_from_sharing - wasted * settlement_fit
    double paid_minus_earned_eur = 0.0;
};

struct ClientOutcome {
    std::string client_id;
    double balance_eur = 0.0;
    double battery_capacity_kwh = 0.0;
    double battery_stored_kwh = 0.0;
    double battery_reserved_kwh = 0.0;
    double energy_from_grid_kwh = 0.0;
    double paid_to_grid_eur = 0.0;
};

struct TradeLogEntry {
    std::size_t t = 0;
    std::string group_id;
    std::string kind; // "trade" or "resale"
    std::string seller;
    std::string buyer;
    double amount_kwh = 0.0;
    double unit_price = 0.0;
    double fee_eur = 0.0;
};

/// Per-step energy flows of one group, for conservation auditing:
/// production + grid + discharged == consumption + charged + wasted.
struct FlowTraceEntry {
    std::string group_id;
    std::size_t t = 0;
    double production_kwh = 0.0;
    double consumption_kwh = 0.0;
    double grid_kwh = 0.0;
    double charged_kwh = 0.0;
    double discharged_kwh = 0.0;
    double wasted_kwh = 0.0;
};

struct GroupResult {
    MetricsRow metrics;
    std::vector<ClientOutcome> clients;
    double central_balance_eur = 0.0;
    double initial_balance_total_eur = 0.0;
};

struct RunResult {
    RunConfig config;
    Horizon horizon;
    std::vector<GroupResult> groups;
    /// Arithmetic mean over groups of every metric (pct over groups where
    /// defined). Equals the single group's row under the all-in-one scenario.
    MetricsRow aggregate;
    std::vector<TradeLogEntry> trade_log;
    std::vector<FlowTraceEntry> flow_trace;
};

/// Simulate `config` over a cleaned dataset. Groups run independently: each
/// gets its own price history, ledger, accounts and central pot. Caller-fed
/// records may still contain absent points; they are cleaned here.
/// Throws ConfigError for invalid parameters or a series/horizon mismatch.
RunResult run(const RunConfig& config, std::vector<ClientRecord> clients, const Horizon& horizon);

/// Deterministic JSON serialization of a result; equal results serialize to
/// identical bytes.
std::string to_json(const RunResult& result);

/// Per-group metrics table (rows: groups + AVERAGE) as CSV, energies in Wh.
std::string metrics_csv(const RunResult& result);

/// Human-readable aggregate summary for the console.
std::string summary_text(const RunResult& result);

/// Metric keys common to exported tables, in column order.
const std::vector<std::string>& metric_table_columns();

/// The aggregate row shaped for a metrics-by-strategy table: energies in Wh,
/// inapplicable cells "N/A", numbers shortest-round-trip formatted.
std::vector<std::string> metric_table_cells(const MetricsRow& row, Strategy strategy);

} // namespace gridshare
