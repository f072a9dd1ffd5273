#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gridshare/storage.hpp"
#include "gridshare/types.hpp"

namespace gridshare {

/// Per-agent trading funds plus the central entity's pot. Balances move only
/// through trades and sharing payments; grid spending is tracked elsewhere
/// and never draws them down. No balance ever goes negative.
class Accounts {
public:
    Accounts() = default;
    Accounts(std::size_t agents, double initial_balance_eur)
        : client_(agents, initial_balance_eur) {}

    double balance(AgentIndex agent) const;
    void credit(AgentIndex agent, double eur);
    /// Requires eur <= balance(agent); callers clamp first.
    void debit(AgentIndex agent, double eur);

    double central() const { return central_; }
    double client_total() const;
    std::size_t agents() const { return client_.size(); }

private:
    std::vector<double> client_;
    double central_ = 0.0;
};

/// Surplus energy posted for sale this timestep. `remaining_kwh` is mutated
/// in place by matching; what is left at settlement is wasted (sold to the
/// grid at feed-in terms).
struct Offer {
    AgentIndex seller = 0;
    double remaining_kwh = 0.0;
};

/// Energy demand backed by the buyer's expectation of affordability.
struct BuyRequest {
    AgentIndex buyer = 0;
    double remaining_kwh = 0.0;
};

/// Demand from an agent that cannot afford to buy but has battery capacity to
/// host a share.
struct ShareRequest {
    AgentIndex consumer = 0;
    double remaining_kwh = 0.0;
};

enum class TradeKind {
    PeerTrade,     // fresh offer vs buy request
    ResaleOfShare, // stored share sold to a buy request
};

struct Trade {
    TradeKind kind = TradeKind::PeerTrade;
    AgentIndex seller = 0; // for resales: who was credited
    AgentIndex buyer = 0;
    double amount_kwh = 0.0;
    double unit_price = 0.0;
    double buyer_paid_eur = 0.0;    // == seller_credit + fee exactly
    double seller_credit_eur = 0.0;
    double fee_eur = 0.0;
};

/// Dynamic price engine. Seeded with the first utility price in all three
/// history slots; each step computes
///   p_t = max(fit_floor_t, min(utility_t, (R_t / O_t) * mean(p_{t-1..t-3})))
/// and with no offers carries p_{t-1} forward (that step trades nothing).
/// Whenever O_t > 0, fit_floor_t <= p_t <= utility_t.
class PriceEngine {
public:
    /// utility: per-step price series (size 1 means constant).
    /// fit_floor: pass a non-negative constant, or a negative value to use
    /// utility_t / 3.
    PriceEngine(std::vector<double> utility, double fit_floor);

    double utility_price(std::size_t t) const;
    double fit_floor(std::size_t t) const;

    /// Price buyers would plan against before this step clears: p_{t-1}.
    double expected_price() const { return h1_; }

    /// Compute p_t from this step's request and offer counts, shift history,
    /// record p_t for the running mean.
    double step(std::size_t t, std::size_t request_count, std::size_t offer_count);

    double current() const { return h1_; }
    double mean_cleared() const;
    std::size_t steps_recorded() const { return count_; }

private:
    std::vector<double> utility_;
    double fit_constant_;
    bool fit_third_of_utility_;
    double h1_, h2_, h3_; // p_{t-1}, p_{t-2}, p_{t-3}
    double sum_ = 0.0;
    std::size_t count_ = 0;
};

/// First-come-first-served matching: walk buy requests in arrival order and
/// fill each from offers in arrival order. Quantity per fill is
/// min(offer remaining, request remaining, buyer-affordable amount). The
/// buyer pays q * price, the seller receives (1 - fee_rate) of that, the fee
/// goes to the central pot. Books are reduced in place; entries left with
/// remaining > 0 are the residuals. A buyer who cannot afford any positive
/// quantity is skipped, never overdrawn.
std::vector<Trade> match_fcfs(std::vector<Offer>& offers, std::vector<BuyRequest>& requests,
                              double unit_price, double fee_rate, Accounts& accounts);

enum class ResaleBeneficiary {
    Sharer,  // record owner is credited (peer-to-peer scheme)
    Central, // central pot is credited (centralized scheme)
};

/// Resell parked shares to buy requests before any fresh matching: requests
/// in arrival order, live records in FIFO creation order, no fee. Sold energy
/// leaves the host battery. Books and ledger are reduced in place.
std::vector<Trade> sell_stored_shares(ShareLedger& ledger, BatteryMap& batteries,
                                      std::vector<BuyRequest>& requests, double unit_price,
                                      ResaleBeneficiary beneficiary, Accounts& accounts,
                                      std::size_t t);

/// One executed share: `matched` was taken from the offer, `delivered` went
/// straight to the consumer and `stored` was parked in the consumer's battery
/// under `sharer`. delivered + stored == matched exactly.
struct ShareEvent {
    AgentIndex prosumer = 0;
    AgentIndex consumer = 0;
    double matched_kwh = 0.0;
    double delivered_kwh = 0.0;
    double stored_kwh = 0.0;
    double payment_to_prosumer_eur = 0.0; // nonzero only when centrally funded
    std::int64_t record_id = -1;          // -1 when nothing was stored
};

struct ShareOptions {
    double usable_fraction = 0.5; // delivered share of each match
    std::size_t expiry_steps = 12;
    bool sharer_is_central = false; // records owned by kCentralAgent instead of the prosumer

    /// When set, the central pot pays the prosumer unit_price per matched kWh
    /// at share time; matches shrink to what the pot can fund.
    bool central_funded = false;
    double unit_price = 0.0;

    /// Optional per-prosumer cap on the additional quantity matchable now
    /// (the selfish scheme's remaining-need rule). Re-evaluated before every
    /// pairing so earlier matches in the same step count.
    std::function<double(AgentIndex prosumer)> prosumer_cap;
};

/// Allocate leftover offers to share requests: offers in arrival order, each
/// walked against requests in arrival order. Per pairing, the matched
/// quantity is min(offer remaining, request remaining) further clamped by the
/// options' cap and funding rules. The stored part goes into the consumer's
/// battery via the ledger. Books are reduced in place.
std::vector<ShareEvent> share_out(std::vector<Offer>& offers, std::vector<ShareRequest>& requests,
                                  ShareLedger& ledger, BatteryMap& batteries, Accounts& accounts,
                                  std::size_t t, const ShareOptions& options);

} // namespace gridshare
