#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gridshare/config.hpp"
#include "gridshare/dataset.hpp"
#include "gridshare/report.hpp"
#include "gridshare/simulator.hpp"

namespace fs = std::filesystem;
using namespace gridshare;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCompareFailed = 1;
constexpr int kExitInputError = 2;

struct CliOptions {
    std::string config_path;
    std::string data_path;
    std::string out_dir;
    std::string reference_path;
    std::string metrics_path;
    std::string strategy;
    std::string scenario;
    std::vector<std::string> sweep_strategies;
    double tolerance = 0.01;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> horizon_steps;
    bool quiet = false;
};

// Loads config file (if given), then applies flag overrides. The data file
// must come from one of the two.
FileConfig resolve_config(const CliOptions& opt) {
    FileConfig fc;
    if (!opt.config_path.empty()) fc = load_config(opt.config_path);
    if (!opt.data_path.empty()) fc.data_path = opt.data_path;
    if (fc.data_path.empty()) {
        throw ConfigError("no data file: pass --data or set 'data' in the config");
    }
    if (!opt.strategy.empty()) fc.run.strategy = parse_strategy(opt.strategy);
    if (!opt.scenario.empty()) fc.run.scenario = parse_scenario(opt.scenario);
    if (opt.seed) fc.run.rng_seed = *opt.seed;
    if (opt.horizon_steps) fc.run.horizon_steps = *opt.horizon_steps;
    return fc;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    out << content;
    if (!out) throw DataError(path.string() + ": write failed");
}

void write_run_outputs(const RunResult& result, const fs::path& dir) {
    fs::create_directories(dir);
    write_file(dir / "result.json", to_json(result));
    write_file(dir / "metrics.csv", metrics_csv(result));
}

int cmd_run(const CliOptions& opt) {
    FileConfig fc = resolve_config(opt);
    Horizon horizon = detect_horizon(fc.data_path);
    std::vector<ClientRecord> clients = load_clients(fc.data_path, horizon);
    RunResult result = run(fc.run, std::move(clients), horizon);
    write_run_outputs(result, opt.out_dir);
    if (!opt.quiet) std::cout << summary_text(result);
    return kExitOk;
}

int cmd_sweep(const CliOptions& opt) {
    FileConfig fc = resolve_config(opt);
    Horizon horizon = detect_horizon(fc.data_path);
    std::vector<ClientRecord> clients = load_clients(fc.data_path, horizon);

    std::vector<Strategy> strategies;
    if (opt.sweep_strategies.empty()) {
        strategies = {Strategy::NoTrading,         Strategy::Trading,
                      Strategy::TradingWithBatteries, Strategy::CentralizedSharing,
                      Strategy::PeerToPeerSharing, Strategy::SelfishSharing};
    } else {
        for (const std::string& token : opt.sweep_strategies) {
            strategies.push_back(parse_strategy(token));
        }
    }

    // Each run is pure and owns a copy of the dataset, so they can proceed
    // in parallel; outputs are written in strategy order afterwards.
    std::vector<std::future<RunResult>> futures;
    futures.reserve(strategies.size());
    for (Strategy strategy : strategies) {
        RunConfig cfg = fc.run;
        cfg.strategy = strategy;
        futures.push_back(std::async(std::launch::async, [cfg, clients, horizon]() {
            return run(cfg, clients, horizon);
        }));
    }

    MetricTable table;
    table.corner = "strategy";
    table.columns = metric_table_columns();
    fs::path out_root(opt.out_dir);
    fs::create_directories(out_root);
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        RunResult result = futures[i].get();
        const std::string token(to_string(strategies[i]));
        write_run_outputs(result, out_root / token);
        table.rows.push_back(token);
        table.cells.push_back(metric_table_cells(result.aggregate, strategies[i]));
        if (!opt.quiet) std::cout << summary_text(result) << '\n';
    }
    table.write_csv((out_root / "sweep.csv").string());
    return kExitOk;
}

int cmd_compare(const CliOptions& opt) {
    MetricTable actual = MetricTable::read_csv(opt.metrics_path);
    MetricTable expected = MetricTable::read_csv(opt.reference_path);
    std::vector<CellDiff> diffs = compare_tables(actual, expected, opt.tolerance);
    std::size_t failed = 0;
    for (const CellDiff& d : diffs) {
        if (d.ok) continue;
        ++failed;
        std::cout << "compare: " << d.row << "/" << d.column << ": actual " << d.actual
                  << " vs expected " << d.expected << " (rel diff "
                  << format_double(d.relative_error) << ")\n";
    }
    if (failed == 0) {
        std::cout << "compare: all " << diffs.size() << " cells within tolerance "
                  << format_double(opt.tolerance) << '\n';
        return kExitOk;
    }
    std::cout << "compare: " << failed << " of " << diffs.size() << " cells out of tolerance "
              << format_double(opt.tolerance) << '\n';
    return kExitCompareFailed;
}

int cmd_validate_data(const CliOptions& opt) {
    if (opt.data_path.empty()) throw ConfigError("validate-data requires --data");
    Horizon horizon = detect_horizon(opt.data_path);
    std::vector<ClientRecord> clients = load_clients(opt.data_path, horizon);
    std::size_t missing_cells = 0;
    std::size_t business = 0;
    std::vector<std::string> counties;
    for (const ClientRecord& rec : clients) {
        for (double v : rec.consumption_kwh) missing_cells += std::isnan(v) ? 1 : 0;
        for (double v : rec.production_kwh) missing_cells += std::isnan(v) ? 1 : 0;
        if (rec.is_business) ++business;
        if (std::find(counties.begin(), counties.end(), rec.county_id) == counties.end()) {
            counties.push_back(rec.county_id);
        }
    }
    std::cout << "data: " << clients.size() << " clients, " << counties.size() << " counties, "
              << horizon.steps << " hourly steps from " << format_epoch_hour(horizon.start_hour)
              << ", " << business << " business clients, " << missing_cells
              << " missing cells (zero-filled at run time)\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Microgrid energy trading and sharing simulator"};
    app.require_subcommand(1);
    CliOptions opt;

    auto add_common = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("--config", opt.config_path, "key=value config file");
        cmd->add_option("--data", opt.data_path, "input CSV (overrides config)");
        cmd->add_option("--seed", opt.seed, "battery capacity seed (overrides config)");
        cmd->add_option("--strategy", opt.strategy,
                        "no_trading|trading|tnb|cse|p2pse|sse (overrides config)");
        cmd->add_option("--scenario", opt.scenario,
                        "within_county|across_counties (overrides config)");
        cmd->add_option("--horizon-steps", opt.horizon_steps,
                        "simulate only the first N steps (overrides config)");
        cmd->add_flag("--quiet", opt.quiet, "suppress the summary printout");
        if (with_out) {
            cmd->add_option("--out", opt.out_dir, "output directory")->required();
        }
    };

    CLI::App* run_cmd = app.add_subcommand("run", "simulate one configuration");
    add_common(run_cmd, true);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "simulate several strategies");
    add_common(sweep_cmd, true);
    sweep_cmd->add_option("--strategies", opt.sweep_strategies,
                          "strategy tokens to sweep (default: all six)")
        ->delimiter(',');

    CLI::App* compare_cmd =
        app.add_subcommand("compare", "compare a metric table against a reference table");
    compare_cmd->add_option("metrics", opt.metrics_path, "produced metric CSV")->required();
    compare_cmd->add_option("--reference", opt.reference_path, "reference CSV")->required();
    compare_cmd->add_option("--tolerance", opt.tolerance,
                            "max relative difference per cell (default 0.01)");

    CLI::App* validate_cmd = app.add_subcommand("validate-data", "load and describe a data file");
    validate_cmd->add_option("--data", opt.data_path, "input CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return kExitInputError;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(opt);
        if (sweep_cmd->parsed()) return cmd_sweep(opt);
        if (compare_cmd->parsed()) return cmd_compare(opt);
        if (validate_cmd->parsed()) return cmd_validate_data(opt);
        std::cerr << "error: usage: no subcommand\n";
        return kExitInputError;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
    } catch (const ParseError& e) {
        std::cerr << "error: parse: " << e.what() << '\n';
    } catch (const DataError& e) {
        std::cerr << "error: data: " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
    }
    return kExitInputError;
}
