#include "gridshare/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <unordered_map>

#include "text_util.hpp"

namespace gridshare {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

constexpr std::string_view kHeader =
    "client_id,county_id,is_business,product_type,eic_count,pv_capacity_kw,"
    "timestamp,consumption_kwh,production_kwh";

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
    throw ParseError(source + ": line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void data_fail(const std::string& source, std::size_t line, const std::string& what) {
    throw DataError(source + ": line " + std::to_string(line) + ": " + what);
}

// Days between 1970-01-01 and y-m-d in the proleptic Gregorian calendar.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3u : 9u)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

bool parse_fixed_uint(std::string_view s, unsigned& out) {
    out = 0;
    if (s.empty()) return false;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        out = out * 10 + static_cast<unsigned>(c - '0');
    }
    return true;
}

} // namespace

std::string_view to_string(ProductType p) {
    switch (p) {
        case ProductType::Combined: return "Combined";
        case ProductType::Fixed: return "Fixed";
        case ProductType::GeneralService: return "GeneralService";
        case ProductType::Spot: return "Spot";
    }
    return "?";
}

ProductType parse_product_type(std::string_view token) {
    if (token == "Combined") return ProductType::Combined;
    if (token == "Fixed") return ProductType::Fixed;
    if (token == "GeneralService" || token == "General Service" || token == "General service") {
        return ProductType::GeneralService;
    }
    if (token == "Spot") return ProductType::Spot;
    throw DataError("unknown product type: '" + std::string(token) + "'");
}

std::int64_t parse_epoch_hour(std::string_view timestamp) {
    // YYYY-MM-DD[T ]HH:MM[:SS], strictly on the hour.
    auto ts = detail::trim(timestamp);
    if (ts.size() < 16) throw ParseError("bad timestamp: '" + std::string(timestamp) + "'");
    unsigned year = 0, month = 0, day = 0, hh = 0, mm = 0, ss = 0;
    bool ok = parse_fixed_uint(ts.substr(0, 4), year) && ts[4] == '-' &&
              parse_fixed_uint(ts.substr(5, 2), month) && ts[7] == '-' &&
              parse_fixed_uint(ts.substr(8, 2), day) && (ts[10] == 'T' || ts[10] == ' ') &&
              parse_fixed_uint(ts.substr(11, 2), hh) && ts[13] == ':' &&
              parse_fixed_uint(ts.substr(14, 2), mm);
    if (ok && ts.size() > 16) {
        ok = ts.size() == 19 && ts[16] == ':' && parse_fixed_uint(ts.substr(17, 2), ss);
    } else if (ok) {
        ok = ts.size() == 16;
    }
    if (!ok || month < 1 || month > 12 || day < 1 || day > 31 || hh > 23) {
        throw ParseError("bad timestamp: '" + std::string(timestamp) + "'");
    }
    if (mm != 0 || ss != 0) {
        throw ParseError("timestamp not on the hour: '" + std::string(timestamp) + "'");
    }
    return days_from_civil(static_cast<std::int64_t>(year), month, day) * 24 +
           static_cast<std::int64_t>(hh);
}

std::string format_epoch_hour(std::int64_t hour) {
    std::int64_t days = hour / 24;
    std::int64_t hh = hour % 24;
    if (hh < 0) {
        hh += 24;
        days -= 1;
    }
    std::int64_t y = 0;
    unsigned m = 0, d = 0;
    civil_from_days(days, y, m, d);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:00:00", static_cast<long long>(y), m, d,
                  static_cast<long long>(hh));
    return buf;
}

Horizon detect_horizon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    std::string line;
    std::size_t line_no = 0;
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();
    bool any = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = detail::trim(line);
        if (t.empty()) continue;
        if (line_no == 1) continue; // header
        auto fields = detail::split(t, ',');
        if (fields.size() != 9) parse_fail(path, line_no, "expected 9 columns");
        std::int64_t h = 0;
        try {
            h = parse_epoch_hour(fields[6]);
        } catch (const ParseError& e) {
            parse_fail(path, line_no, e.what());
        }
        lo = std::min(lo, h);
        hi = std::max(hi, h);
        any = true;
    }
    if (!any) return {};
    return {lo, static_cast<std::size_t>(hi - lo + 1)};
}

std::vector<ClientRecord> load_clients(const std::string& path, const Horizon& horizon) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    return load_clients(in, horizon, path);
}

std::vector<ClientRecord> load_clients(std::istream& in, const Horizon& horizon,
                                       const std::string& source_name) {
    std::vector<ClientRecord> clients;
    std::vector<std::vector<bool>> seen; // parallel to clients, per-timestep row flags
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;

    while (std::getline(in, line)) {
        ++line_no;
        auto t = detail::trim(line);
        if (t.empty()) continue;
        if (!header_seen) {
            if (t != kHeader) {
                parse_fail(source_name, line_no,
                           "header mismatch, expected '" + std::string(kHeader) + "'");
            }
            header_seen = true;
            continue;
        }

        auto f = detail::split(t, ',');
        if (f.size() != 9) parse_fail(source_name, line_no, "expected 9 columns");
        for (auto& field : f) field = detail::trim(field);

        std::string client_id(f[0]);
        if (client_id.empty()) parse_fail(source_name, line_no, "empty client_id");
        std::string county_id(f[1]);
        if (county_id.empty()) parse_fail(source_name, line_no, "empty county_id");

        bool is_business = false;
        if (f[2] == "0") {
            is_business = false;
        } else if (f[2] == "1") {
            is_business = true;
        } else {
            parse_fail(source_name, line_no, "is_business must be 0 or 1");
        }

        ProductType product{};
        try {
            product = parse_product_type(f[3]);
        } catch (const DataError& e) {
            data_fail(source_name, line_no, e.what());
        }

        long long eic = 0;
        if (!detail::parse_int64(f[4], eic) || eic < 1) {
            data_fail(source_name, line_no, "eic_count must be a positive integer");
        }

        double pv = 0.0;
        if (!detail::parse_double(f[5], pv) || pv < 0.0) {
            parse_fail(source_name, line_no, "bad pv_capacity_kw");
        }

        std::int64_t hour = 0;
        try {
            hour = parse_epoch_hour(f[6]);
        } catch (const ParseError& e) {
            parse_fail(source_name, line_no, e.what());
        }

        double cons = kMissing;
        if (!f[7].empty()) {
            if (!detail::parse_double(f[7], cons)) {
                parse_fail(source_name, line_no, "bad consumption_kwh");
            }
            if (cons < 0.0) data_fail(source_name, line_no, "negative consumption_kwh");
        }
        double prod = kMissing;
        if (!f[8].empty()) {
            if (!detail::parse_double(f[8], prod)) {
                parse_fail(source_name, line_no, "bad production_kwh");
            }
            if (prod < 0.0) data_fail(source_name, line_no, "negative production_kwh");
        }

        std::size_t ci;
        auto it = index.find(client_id);
        if (it == index.end()) {
            ci = clients.size();
            index.emplace(client_id, ci);
            ClientRecord rec;
            rec.client_id = client_id;
            rec.county_id = county_id;
            rec.is_business = is_business;
            rec.product_type = product;
            rec.eic_count = static_cast<int>(eic);
            rec.pv_capacity_kw = pv;
            rec.consumption_kwh.assign(horizon.steps, kMissing);
            rec.production_kwh.assign(horizon.steps, kMissing);
            clients.push_back(std::move(rec));
            seen.emplace_back(horizon.steps, false);
        } else {
            ci = it->second;
            const ClientRecord& rec = clients[ci];
            if (rec.county_id != county_id || rec.is_business != is_business ||
                rec.product_type != product || rec.eic_count != eic) {
                data_fail(source_name, line_no,
                          "inconsistent metadata for client '" + client_id + "'");
            }
        }

        std::int64_t rel = hour - horizon.start_hour;
        if (rel < 0 || rel >= static_cast<std::int64_t>(horizon.steps)) {
            continue; // outside the requested window
        }
        auto ti = static_cast<std::size_t>(rel);
        ClientRecord& rec = clients[ci];
        if (seen[ci][ti]) {
            data_fail(source_name, line_no,
                      "duplicate entry for client '" + client_id + "' at " + std::string(f[6]));
        }
        seen[ci][ti] = true;
        rec.consumption_kwh[ti] = cons;
        rec.production_kwh[ti] = prod;
    }
    return clients;
}

ClientRecord fill_missing(ClientRecord record, const Horizon& horizon) {
    record.consumption_kwh.resize(horizon.steps, kMissing);
    record.production_kwh.resize(horizon.steps, kMissing);
    for (double& v : record.consumption_kwh) {
        if (std::isnan(v)) v = 0.0;
    }
    for (double& v : record.production_kwh) {
        if (std::isnan(v)) v = 0.0;
    }
    return record;
}

double assign_battery_capacity(const ClientRecord& record, std::uint64_t rng_seed) {
    std::uint64_t state = splitmix64(rng_seed ^ fnv1a64(record.client_id));
    double u = 5.0 + 15.0 * uniform_unit(splitmix64(state));
    return u * static_cast<double>(record.eic_count);
}

std::vector<MarketGroup> partition(const std::vector<ClientRecord>& clients, Scenario scenario) {
    std::vector<MarketGroup> groups;
    if (scenario == Scenario::AcrossCounties) {
        MarketGroup all;
        all.group_id = "all";
        all.members.resize(clients.size());
        for (std::size_t i = 0; i < clients.size(); ++i) all.members[i] = i;
        groups.push_back(std::move(all));
        return groups;
    }
    std::unordered_map<std::string, std::size_t> by_county;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        const std::string& county = clients[i].county_id;
        auto it = by_county.find(county);
        if (it == by_county.end()) {
            by_county.emplace(county, groups.size());
            groups.push_back({county, {i}});
        } else {
            groups[it->second].members.push_back(i);
        }
    }
    return groups;
}

double net_energy(const ClientRecord& record, std::size_t t) {
    if (t >= record.consumption_kwh.size() || t >= record.production_kwh.size()) {
        throw std::out_of_range("net_energy: timestep " + std::to_string(t) +
                                " outside series for client '" + record.client_id + "'");
    }
    return record.production_kwh[t] - record.consumption_kwh[t];
}

std::string_view to_string(Scenario s) {
    return s == Scenario::WithinCounty ? "within_county" : "across_counties";
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::NoTrading: return "no_trading";
        case Strategy::Trading: return "trading";
        case Strategy::TradingWithBatteries: return "tnb";
        case Strategy::CentralizedSharing: return "cse";
        case Strategy::PeerToPeerSharing: return "p2pse";
        case Strategy::SelfishSharing: return "sse";
    }
    return "?";
}

Scenario parse_scenario(std::string_view token) {
    if (token == "within_county") return Scenario::WithinCounty;
    if (token == "across_counties") return Scenario::AcrossCounties;
    throw ConfigError("unknown scenario: '" + std::string(token) + "'");
}

Strategy parse_strategy(std::string_view token) {
    if (token == "no_trading") return Strategy::NoTrading;
    if (token == "trading") return Strategy::Trading;
    if (token == "tnb") return Strategy::TradingWithBatteries;
    if (token == "cse") return Strategy::CentralizedSharing;
    if (token == "p2pse") return Strategy::PeerToPeerSharing;
    if (token == "sse") return Strategy::SelfishSharing;
    throw ConfigError("unknown strategy: '" + std::string(token) + "'");
}

} // namespace gridshare
