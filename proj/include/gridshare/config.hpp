#pragma once

#include <iosfwd>
#include <string>

#include "gridshare/simulator.hpp"

namespace gridshare {

/// A run configuration file plus the dataset path it names. Flat key = value
/// lines, '#' comments. Keys (all optional, defaults in RunConfig):
///   data, scenario, strategy, eta, tau, fee_rate, initial_balance,
///   utility_price, utility_price_file, fit_floor, settlement_fit, seed,
///   horizon_steps, trade_log, flow_trace
/// fit_floor / settlement_fit take a number or the words "third_of_utility" /
/// "third_of_mean_price". Unknown keys throw ConfigError.
struct FileConfig {
    RunConfig run;
    std::string data_path;
};

FileConfig load_config(const std::string& path);
FileConfig load_config(std::istream& in, const std::string& source_name);

} // namespace gridshare
