#pragma once

#include <span>
#include <vector>

#include "gridshare/dataset.hpp"
#include "gridshare/market.hpp"
#include "gridshare/storage.hpp"
#include "gridshare/types.hpp"

namespace gridshare {

/// Per-agent state inside one group. Balances live in Accounts; client series
/// are passed alongside. deficit/excess describe the current step only and
/// are never both positive.
struct MicrogridState {
    Battery battery;
    double deficit_kwh = 0.0; // unmet need, shrinks as trades and shares land
    double excess_kwh = 0.0;  // surplus offered to the market this step
};

/// Perfect-foresight need lookup over cleaned series: the summed deficits of
/// client i over steps t+1 .. t+window, truncated at the series end.
class NeedOracle {
public:
    NeedOracle(std::span<const ClientRecord* const> clients, std::size_t window)
        : clients_(clients.begin(), clients.end()), window_(window) {}

    double needed(AgentIndex i, std::size_t t) const;

private:
    std::vector<const ClientRecord*> clients_;
    std::size_t window_;
};

/// This step's submissions, arrival order == agent order.
struct StepBooks {
    std::vector<Offer> offers;
    std::vector<BuyRequest> buy_requests;
    std::vector<ShareRequest> share_requests;
};

/// Energy-flow tallies for one timestep, the raw material for conservation
/// checks and reports.
struct StepTally {
    double production_kwh = 0.0;
    double consumption_kwh = 0.0;
    double charged_kwh = 0.0;    // all stored-energy increases (own charge + parked shares)
    double discharged_kwh = 0.0; // all stored-energy decreases (own use + draws + resales)
    double reclaimed_kwh = 0.0;  // owner draw-backs of previously shared energy
    double released_kwh = 0.0;   // expired reservations handed to hosts
    double grid_kwh = 0.0;
    double grid_eur = 0.0;
    double wasted_kwh = 0.0;
};

/// Parameters a strategy step needs beyond the books.
struct StepParams {
    Strategy strategy = Strategy::Trading;
    double usable_fraction = 0.5; // stored fraction is its complement
    std::size_t expiry_steps = 12;
    double fee_rate = 0.0; // charged only by the centralized scheme
};

/// Run every agent's submission pass for timestep t, in agent order:
/// surplus charges the battery first and offers the leftover; need draws
/// reclaimable shares (selfish scheme only), then the battery, then becomes a
/// buy request if expected spend fits the balance, else a share request if
/// battery capacity remains. Battery steps are skipped entirely by the
/// battery-less strategies. Leaves each agent's outstanding deficit/excess in
/// its state and returns the books.
StepBooks submit(std::span<MicrogridState> states,
                 std::span<const ClientRecord* const> clients, const Accounts& accounts,
                 double expected_price, const StepParams& params, ShareLedger& ledger,
                 BatteryMap& batteries, std::size_t t, StepTally& tally);

/// Everything one strategy step operates on.
struct StepContext {
    std::span<MicrogridState> states;
    std::span<const ClientRecord* const> clients;
    Accounts& accounts;
    ShareLedger& ledger;
    BatteryMap& batteries;
    PriceEngine& price;
    const NeedOracle* oracle = nullptr;   // selfish scheme only
    std::span<double> grid_kwh_by_agent;  // settlement sinks, sized like states
    std::span<double> grid_eur_by_agent;
    StepParams params;
    std::size_t t = 0;
    StepTally tally;
    std::vector<Trade> trades;      // fresh matches and resales this step
    std::vector<ShareEvent> shares; // sharing allocations this step
};

/// Execute timestep t for the configured strategy: expiry, submissions,
/// price formation, the strategy's market phases, then grid settlement of
/// leftover deficits at the utility price and write-off of leftover offers as
/// energy sold back to the grid. With no offers the step trades nothing and
/// the price carries over.
void run_step(StepContext& cx);

} // namespace gridshare
