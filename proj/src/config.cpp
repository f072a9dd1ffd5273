#include "gridshare/config.hpp"

#include <fstream>
#include <sstream>

#include "text_util.hpp"

namespace gridshare {

using detail::trim;

namespace {

double require_double(const std::string& value, const std::string& key) {
    double v;
    if (!detail::parse_double(value, v)) {
        throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
    }
    return v;
}

long long require_int(const std::string& value, const std::string& key) {
    long long v;
    if (!detail::parse_int64(value, v)) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
    }
    return v;
}

bool require_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + value + "'");
}

std::vector<double> load_price_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open utility price file");
    std::vector<double> series;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = trim(line);
        if (auto hash = body.find('#'); hash != std::string_view::npos) {
            body = trim(body.substr(0, hash));
        }
        if (body.empty()) continue;
        double v;
        if (!detail::parse_double(body, v)) {
            throw ConfigError(path + ": line " + std::to_string(line_no) +
                              ": expected one price per line");
        }
        if (!(v > 0.0)) {
            throw ConfigError(path + ": line " + std::to_string(line_no) +
                              ": prices must be positive");
        }
        series.push_back(v);
    }
    if (series.empty()) throw ConfigError(path + ": no prices found");
    return series;
}

} // namespace

FileConfig load_config(std::istream& in, const std::string& source_name) {
    FileConfig fc;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        return ConfigError(source_name + ": line " + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = trim(line);
        if (auto hash = body.find('#'); hash != std::string_view::npos) {
            body = trim(body.substr(0, hash));
        }
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string_view::npos) throw fail("expected key = value");
        std::string key(trim(body.substr(0, eq)));
        std::string value(trim(body.substr(eq + 1)));
        if (key.empty()) throw fail("empty key");
        if (value.empty()) throw fail("key '" + key + "' has no value");

        try {
            if (key == "data") {
                fc.data_path = value;
            } else if (key == "scenario") {
                fc.run.scenario = parse_scenario(value);
            } else if (key == "strategy") {
                fc.run.strategy = parse_strategy(value);
            } else if (key == "eta") {
                fc.run.usable_fraction = require_double(value, key);
            } else if (key == "tau") {
                fc.run.expiry_steps = static_cast<std::size_t>(require_int(value, key));
            } else if (key == "fee_rate") {
                fc.run.fee_rate = require_double(value, key);
            } else if (key == "initial_balance") {
                fc.run.initial_balance_eur = require_double(value, key);
            } else if (key == "utility_price") {
                fc.run.utility_price_eur_kwh = require_double(value, key);
            } else if (key == "utility_price_file") {
                fc.run.utility_price_series = load_price_series(value);
            } else if (key == "fit_floor") {
                if (value == "third_of_utility") {
                    fc.run.fit_floor_eur_kwh.reset();
                } else {
                    fc.run.fit_floor_eur_kwh = require_double(value, key);
                }
            } else if (key == "settlement_fit") {
                if (value == "third_of_mean_price") {
                    fc.run.settlement_fit_eur_kwh.reset();
                } else {
                    fc.run.settlement_fit_eur_kwh = require_double(value, key);
                }
            } else if (key == "seed") {
                fc.run.rng_seed = static_cast<std::uint64_t>(require_int(value, key));
            } else if (key == "horizon_steps") {
                fc.run.horizon_steps = static_cast<std::size_t>(require_int(value, key));
            } else if (key == "trade_log") {
                fc.run.collect_trade_log = require_bool(value, key);
            } else if (key == "flow_trace") {
                fc.run.collect_flow_trace = require_bool(value, key);
            } else {
                throw fail("unknown key '" + key + "'");
            }
        } catch (const ConfigError& e) {
            // Re-wrap with position unless the message already carries one.
            std::string msg = e.what();
            if (msg.rfind(source_name + ": line", 0) == 0) throw;
            throw fail(msg);
        }
    }
    return fc;
}

FileConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    return load_config(in, path);
}

} // namespace gridshare
