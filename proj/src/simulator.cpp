#include "gridshare/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gridshare/market.hpp"
#include "gridshare/report.hpp"
#include "gridshare/storage.hpp"
#include "gridshare/strategies.hpp"

namespace gridshare {

namespace {

void validate(const RunConfig& config, std::size_t steps, std::size_t series_len) {
    if (config.usable_fraction < 0.0 || config.usable_fraction > 1.0) {
        throw ConfigError("eta must lie in [0, 1]");
    }
    if (config.expiry_steps < 1) throw ConfigError("tau must be at least 1");
    if (config.fee_rate < 0.0 || config.fee_rate >= 1.0) {
        throw ConfigError("fee_rate must lie in [0, 1)");
    }
    if (config.initial_balance_eur < 0.0) throw ConfigError("initial_balance must be >= 0");
    if (steps == 0) throw ConfigError("horizon is empty");
    if (steps > series_len) {
        throw ConfigError("horizon_steps (" + std::to_string(steps) +
                          ") exceeds the dataset horizon (" + std::to_string(series_len) + ")");
    }
    if (!config.utility_price_series.empty() && config.utility_price_series.size() < steps) {
        throw ConfigError("utility price series shorter than the horizon");
    }
}

struct GroupAccum {
    double grid_kwh = 0.0;
    double grid_eur = 0.0;
    double p2p_kwh = 0.0;
    double p2p_earned_eur = 0.0;
    double wasted_kwh = 0.0;
    double shared_kwh = 0.0;
    double stored_kwh = 0.0;
    double resold_kwh = 0.0;
    double reclaimed_kwh = 0.0;
    double released_kwh = 0.0;
    double sharing_earned_eur = 0.0;
};

GroupResult simulate_group(const RunConfig& config, const MarketGroup& group,
                           const std::vector<ClientRecord>& clients, std::size_t steps,
                           std::vector<TradeLogEntry>& trade_log,
                           std::vector<FlowTraceEntry>& flow_trace) {
    const std::size_t n = group.members.size();
    std::vector<const ClientRecord*> members(n);
    std::vector<MicrogridState> states(n);
    std::vector<Battery*> battery_ptrs(n);
    for (std::size_t i = 0; i < n; ++i) {
        members[i] = &clients[group.members[i]];
        states[i].battery = Battery(assign_battery_capacity(*members[i], config.rng_seed));
        battery_ptrs[i] = &states[i].battery;
    }
    BatteryMap batteries(std::move(battery_ptrs));
    Accounts accounts(n, config.initial_balance_eur);
    ShareLedger ledger;

    std::vector<double> utility = config.utility_price_series;
    if (utility.empty()) utility.assign(1, config.utility_price_eur_kwh);
    PriceEngine price(std::move(utility),
                      config.fit_floor_eur_kwh ? *config.fit_floor_eur_kwh : -1.0);

    StepParams params;
    params.strategy = config.strategy;
    params.usable_fraction = config.usable_fraction;
    params.expiry_steps = config.expiry_steps;
    params.fee_rate = config.strategy == Strategy::CentralizedSharing ? config.fee_rate : 0.0;

    std::optional<NeedOracle> oracle;
    if (config.strategy == Strategy::SelfishSharing) {
        oracle.emplace(std::span<const ClientRecord* const>(members), config.expiry_steps);
    }

    std::vector<double> grid_kwh_by_agent(n, 0.0);
    std::vector<double> grid_eur_by_agent(n, 0.0);
    GroupAccum acc;

    auto agent_name = [&](AgentIndex a) -> std::string {
        return a == kCentralAgent ? "CENTRAL" : members[static_cast<std::size_t>(a)]->client_id;
    };

    for (std::size_t t = 0; t < steps; ++t) {
        StepContext cx{states,
                       std::span<const ClientRecord* const>(members),
                       accounts,
                       ledger,
                       batteries,
                       price,
                       oracle ? &*oracle : nullptr,
                       grid_kwh_by_agent,
                       grid_eur_by_agent,
                       params,
                       t,
                       {},
                       {},
                       {}};
        run_step(cx);

        acc.grid_kwh += cx.tally.grid_kwh;
        acc.grid_eur += cx.tally.grid_eur;
        acc.wasted_kwh += cx.tally.wasted_kwh;
        acc.reclaimed_kwh += cx.tally.reclaimed_kwh;
        acc.released_kwh += cx.tally.released_kwh;
        for (const Trade& tr : cx.trades) {
            if (tr.kind == TradeKind::PeerTrade) {
                acc.p2p_kwh += tr.amount_kwh;
                acc.p2p_earned_eur += tr.seller_credit_eur;
            } else {
                acc.resold_kwh += tr.amount_kwh;
                if (tr.seller != kCentralAgent) acc.sharing_earned_eur += tr.seller_credit_eur;
            }
            if (config.collect_trade_log) {
                trade_log.push_back({t, group.group_id,
                                     tr.kind == TradeKind::PeerTrade ? "trade" : "resale",
                                     agent_name(tr.seller), agent_name(tr.buyer), tr.amount_kwh,
                                     tr.unit_price, tr.fee_eur});
            }
        }
        for (const ShareEvent& ev : cx.shares) {
            acc.shared_kwh += ev.matched_kwh;
            acc.stored_kwh += ev.stored_kwh;
            acc.sharing_earned_eur += ev.payment_to_prosumer_eur;
        }
        if (config.collect_flow_trace) {
            flow_trace.push_back({group.group_id, t, cx.tally.production_kwh,
                                  cx.tally.consumption_kwh, cx.tally.grid_kwh,
                                  cx.tally.charged_kwh, cx.tally.discharged_kwh,
                                  cx.tally.wasted_kwh});
        }
    }

    double leftover = 0.0;
    for (const ShareRecord& rec : ledger.records()) leftover += rec.remaining_kwh;

    GroupResult out;
    MetricsRow& row = out.metrics;
    row.group_id = group.group_id;
    row.energy_from_grid_kwh = acc.grid_kwh;
    row.paid_to_grid_eur = acc.grid_eur;
    row.p2p_traded_kwh = acc.p2p_kwh;
    row.earned_from_p2p_eur = acc.p2p_earned_eur;
    row.wasted_kwh = acc.wasted_kwh;
    row.shared_kwh = acc.shared_kwh;
    row.stored_share_kwh = acc.stored_kwh;
    row.resold_share_kwh = acc.resold_kwh;
    row.reclaimed_share_kwh = acc.reclaimed_kwh;
    row.released_share_kwh = acc.released_kwh;
    row.leftover_share_kwh = leftover;
    row.earned_from_sharing_eur = acc.sharing_earned_eur;
    row.mean_price_eur_kwh = price.mean_cleared();
    row.settlement_fit_eur_kwh = config.settlement_fit_eur_kwh ? *config.settlement_fit_eur_kwh
                                                               : row.mean_price_eur_kwh / 3.0;
    if (acc.stored_kwh > 0.0) {
        row.pct_sold_or_reused =
            100.0 * (1.0 - (acc.released_kwh + leftover) / acc.stored_kwh);
    }
    row.paid_minus_earned_eur = row.paid_to_grid_eur - row.earned_from_p2p_eur -
                                row.earned_from_sharing_eur -
                                row.wasted_kwh * row.settlement_fit_eur_kwh;

    out.clients.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ClientOutcome& co = out.clients[i];
        co.client_id = members[i]->client_id;
        co.balance_eur = accounts.balance(static_cast<AgentIndex>(i));
        co.battery_capacity_kwh = states[i].battery.capacity();
        co.battery_stored_kwh = states[i].battery.stored();
        co.battery_reserved_kwh = states[i].battery.reserved();
        co.energy_from_grid_kwh = grid_kwh_by_agent[i];
        co.paid_to_grid_eur = grid_eur_by_agent[i];
    }
    out.central_balance_eur = accounts.central();
    out.initial_balance_total_eur = config.initial_balance_eur * static_cast<double>(n);
    return out;
}

MetricsRow average_rows(const std::vector<GroupResult>& groups) {
    MetricsRow avg;
    avg.group_id = "AVERAGE";
    if (groups.empty()) return avg;
    const auto count = static_cast<double>(groups.size());
    double pct_sum = 0.0;
    std::size_t pct_count = 0;
    for (const GroupResult& g : groups) {
        const MetricsRow& r = g.metrics;
        avg.energy_from_grid_kwh += r.energy_from_grid_kwh;
        avg.paid_to_grid_eur += r.paid_to_grid_eur;
        avg.p2p_traded_kwh += r.p2p_traded_kwh;
        avg.earned_from_p2p_eur += r.earned_from_p2p_eur;
        avg.wasted_kwh += r.wasted_kwh;
        avg.shared_kwh += r.shared_kwh;
        avg.stored_share_kwh += r.stored_share_kwh;
        avg.resold_share_kwh += r.resold_share_kwh;
        avg.reclaimed_share_kwh += r.reclaimed_share_kwh;
        avg.released_share_kwh += r.released_share_kwh;
        avg.leftover_share_kwh += r.leftover_share_kwh;
        avg.earned_from_sharing_eur += r.earned_from_sharing_eur;
        avg.mean_price_eur_kwh += r.mean_price_eur_kwh;
        avg.settlement_fit_eur_kwh += r.settlement_fit_eur_kwh;
        avg.paid_minus_earned_eur += r.paid_minus_earned_eur;
        if (r.pct_sold_or_reused) {
            pct_sum += *r.pct_sold_or_reused;
            ++pct_count;
        }
    }
    avg.energy_from_grid_kwh /= count;
    avg.paid_to_grid_eur /= count;
    avg.p2p_traded_kwh /= count;
    avg.earned_from_p2p_eur /= count;
    avg.wasted_kwh /= count;
    avg.shared_kwh /= count;
    avg.stored_share_kwh /= count;
    avg.resold_share_kwh /= count;
    avg.reclaimed_share_kwh /= count;
    avg.released_share_kwh /= count;
    avg.leftover_share_kwh /= count;
    avg.earned_from_sharing_eur /= count;
    avg.mean_price_eur_kwh /= count;
    avg.settlement_fit_eur_kwh /= count;
    avg.paid_minus_earned_eur /= count;
    if (pct_count > 0) {
        avg.pct_sold_or_reused = pct_sum / static_cast<double>(pct_count);
    }
    return avg;
}

} // namespace

RunResult run(const RunConfig& config, std::vector<ClientRecord> clients, const Horizon& horizon) {
    std::size_t steps = config.horizon_steps == 0 ? horizon.steps : config.horizon_steps;
    validate(config, steps, horizon.steps);

    for (ClientRecord& rec : clients) {
        rec = fill_missing(std::move(rec), horizon);
    }

    RunResult result;
    result.config = config;
    result.horizon = {horizon.start_hour, steps};

    for (const MarketGroup& group : partition(clients, config.scenario)) {
        result.groups.push_back(simulate_group(config, group, clients, steps, result.trade_log,
                                               result.flow_trace));
    }
    result.aggregate = average_rows(result.groups);
    return result;
}

namespace {

nlohmann::ordered_json metrics_to_json(const MetricsRow& r) {
    nlohmann::ordered_json j;
    j["group_id"] = r.group_id;
    j["energy_from_grid_kwh"] = r.energy_from_grid_kwh;
    j["paid_to_grid_eur"] = r.paid_to_grid_eur;
    j["p2p_traded_kwh"] = r.p2p_traded_kwh;
    j["earned_from_p2p_eur"] = r.earned_from_p2p_eur;
    j["wasted_kwh"] = r.wasted_kwh;
    j["shared_kwh"] = r.shared_kwh;
    j["stored_share_kwh"] = r.stored_share_kwh;
    j["resold_share_kwh"] = r.resold_share_kwh;
    j["reclaimed_share_kwh"] = r.reclaimed_share_kwh;
    j["released_share_kwh"] = r.released_share_kwh;
    j["leftover_share_kwh"] = r.leftover_share_kwh;
    j["earned_from_sharing_eur"] = r.earned_from_sharing_eur;
    if (r.pct_sold_or_reused) {
        j["pct_sold_or_reused"] = *r.pct_sold_or_reused;
    } else {
        j["pct_sold_or_reused"] = nullptr;
    }
    j["mean_price_eur_kwh"] = r.mean_price_eur_kwh;
    j["settlement_fit_eur_kwh"] = r.settlement_fit_eur_kwh;
    j["paid_minus_earned_eur"] = r.paid_minus_earned_eur;
    return j;
}

} // namespace

std::string to_json(const RunResult& result) {
    nlohmann::ordered_json j;
    const RunConfig& c = result.config;
    nlohmann::ordered_json cfg;
    cfg["scenario"] = std::string(to_string(c.scenario));
    cfg["strategy"] = std::string(to_string(c.strategy));
    cfg["eta"] = c.usable_fraction;
    cfg["tau"] = c.expiry_steps;
    cfg["fee_rate"] = c.fee_rate;
    cfg["initial_balance_eur"] = c.initial_balance_eur;
    cfg["utility_price_eur_kwh"] = c.utility_price_eur_kwh;
    cfg["utility_price_series_len"] = c.utility_price_series.size();
    if (c.fit_floor_eur_kwh) {
        cfg["fit_floor"] = *c.fit_floor_eur_kwh;
    } else {
        cfg["fit_floor"] = "third_of_utility";
    }
    if (c.settlement_fit_eur_kwh) {
        cfg["settlement_fit"] = *c.settlement_fit_eur_kwh;
    } else {
        cfg["settlement_fit"] = "third_of_mean_price";
    }
    cfg["rng_seed"] = c.rng_seed;
    cfg["horizon_start"] = format_epoch_hour(result.horizon.start_hour);
    cfg["horizon_steps"] = result.horizon.steps;
    j["config"] = std::move(cfg);

    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (const GroupResult& g : result.groups) {
        nlohmann::ordered_json gj;
        gj["metrics"] = metrics_to_json(g.metrics);
        gj["central_balance_eur"] = g.central_balance_eur;
        gj["initial_balance_total_eur"] = g.initial_balance_total_eur;
        nlohmann::ordered_json clients = nlohmann::ordered_json::array();
        for (const ClientOutcome& co : g.clients) {
            nlohmann::ordered_json cj;
            cj["client_id"] = co.client_id;
            cj["balance_eur"] = co.balance_eur;
            cj["battery_capacity_kwh"] = co.battery_capacity_kwh;
            cj["battery_stored_kwh"] = co.battery_stored_kwh;
            cj["battery_reserved_kwh"] = co.battery_reserved_kwh;
            cj["energy_from_grid_kwh"] = co.energy_from_grid_kwh;
            cj["paid_to_grid_eur"] = co.paid_to_grid_eur;
            clients.push_back(std::move(cj));
        }
        gj["clients"] = std::move(clients);
        groups.push_back(std::move(gj));
    }
    j["groups"] = std::move(groups);
    j["aggregate"] = metrics_to_json(result.aggregate);

    if (result.config.collect_trade_log) {
        nlohmann::ordered_json log = nlohmann::ordered_json::array();
        for (const TradeLogEntry& e : result.trade_log) {
            nlohmann::ordered_json ej;
            ej["t"] = e.t;
            ej["group"] = e.group_id;
            ej["kind"] = e.kind;
            ej["seller"] = e.seller;
            ej["buyer"] = e.buyer;
            ej["amount_kwh"] = e.amount_kwh;
            ej["unit_price"] = e.unit_price;
            ej["fee_eur"] = e.fee_eur;
            log.push_back(std::move(ej));
        }
        j["trade_log"] = std::move(log);
    }
    return j.dump(2) + "\n";
}

const std::vector<std::string>& metric_table_columns() {
    static const std::vector<std::string> cols = {
        "energy_from_grid_wh",
        "paid_to_grid_eur",
        "p2p_traded_energy_wh",
        "earned_from_p2p_trading_eur",
        "energy_wasted_or_sold_to_grid_wh",
        "shared_by_prosumers_wh",
        "pct_sold_or_reused_shared_energy",
        "earned_from_sharing_eur",
        "paid_minus_earned_eur",
    };
    return cols;
}

std::vector<std::string> metric_table_cells(const MetricsRow& row, Strategy strategy) {
    const bool trades = strategy != Strategy::NoTrading;
    const bool shares = uses_sharing(strategy);
    // Sharing pays clients directly only under the centralized and
    // peer-to-peer schemes; the selfish scheme moves no money when sharing.
    const bool sharing_income = strategy == Strategy::CentralizedSharing ||
                                strategy == Strategy::PeerToPeerSharing;
    const std::string na = "N/A";
    std::vector<std::string> cells;
    cells.push_back(format_double(row.energy_from_grid_kwh * 1000.0));
    cells.push_back(format_double(row.paid_to_grid_eur));
    cells.push_back(trades ? format_double(row.p2p_traded_kwh * 1000.0) : na);
    cells.push_back(trades ? format_double(row.earned_from_p2p_eur) : na);
    cells.push_back(format_double(row.wasted_kwh * 1000.0));
    cells.push_back(shares ? format_double(row.shared_kwh * 1000.0) : na);
    cells.push_back(shares && row.pct_sold_or_reused ? format_double(*row.pct_sold_or_reused)
                                                     : na);
    cells.push_back(sharing_income ? format_double(row.earned_from_sharing_eur) : na);
    cells.push_back(format_double(row.paid_minus_earned_eur));
    return cells;
}

std::string metrics_csv(const RunResult& result) {
    std::ostringstream out;
    out << "group";
    for (const std::string& col : metric_table_columns()) out << ',' << col;
    out << '\n';
    auto emit = [&](const MetricsRow& row) {
        out << row.group_id;
        for (const std::string& cell : metric_table_cells(row, result.config.strategy)) {
            out << ',' << cell;
        }
        out << '\n';
    };
    for (const GroupResult& g : result.groups) emit(g.metrics);
    emit(result.aggregate);
    return out.str();
}

std::string summary_text(const RunResult& result) {
    const MetricsRow& r = result.aggregate;
    std::ostringstream out;
    out << "strategy " << to_string(result.config.strategy) << ", scenario "
        << to_string(result.config.scenario) << ", " << result.groups.size() << " group(s), "
        << result.horizon.steps << " steps\n";
    auto cells = metric_table_cells(r, result.config.strategy);
    const auto& cols = metric_table_columns();
    std::size_t width = 0;
    for (const std::string& c : cols) width = std::max(width, c.size());
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out << "  " << cols[i] << std::string(width - cols[i].size() + 2, ' ') << cells[i] << '\n';
    }
    return out.str();
}

} // namespace gridshare
