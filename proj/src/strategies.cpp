#include "gridshare/strategies.hpp"

#include <algorithm>
#include <cmath>

namespace gridshare {

double NeedOracle::needed(AgentIndex i, std::size_t t) const {
    const ClientRecord& rec = *clients_.at(static_cast<std::size_t>(i));
    std::size_t len = std::min(rec.consumption_kwh.size(), rec.production_kwh.size());
    if (len == 0) return 0.0;
    std::size_t last = std::min(t + window_, len - 1);
    double total = 0.0;
    for (std::size_t s = t + 1; s <= last; ++s) {
        double deficit = rec.consumption_kwh[s] - rec.production_kwh[s];
        if (deficit > 0.0) total += deficit;
    }
    return total;
}

StepBooks submit(std::span<MicrogridState> states, std::span<const ClientRecord* const> clients,
                 const Accounts& accounts, double expected_price, const StepParams& params,
                 ShareLedger& ledger, BatteryMap& batteries, std::size_t t, StepTally& tally) {
    StepBooks books;
    const bool battery_mode = uses_batteries(params.strategy);
    const bool selfish = params.strategy == Strategy::SelfishSharing;

    for (std::size_t i = 0; i < states.size(); ++i) {
        const ClientRecord& client = *clients[i];
        MicrogridState& st = states[i];
        auto agent = static_cast<AgentIndex>(i);

        tally.production_kwh += client.production_kwh[t];
        tally.consumption_kwh += client.consumption_kwh[t];
        double ee = net_energy(client, t);

        if (ee > 0.0) {
            double surplus = ee;
            if (battery_mode) {
                double accepted = st.battery.charge(surplus);
                tally.charged_kwh += accepted;
                surplus -= accepted;
            }
            if (surplus > 0.0) {
                books.offers.push_back({agent, surplus});
            }
            st.excess_kwh = surplus;
        } else if (ee < 0.0) {
            double deficit = -ee;
            if (selfish) {
                // Reclaim own parked energy ahead of everything else.
                double drawn = ledger.draw_reserved(batteries, agent, std::nullopt, deficit, t);
                deficit -= drawn;
                tally.reclaimed_kwh += drawn;
                tally.discharged_kwh += drawn;
            }
            if (battery_mode && deficit > 0.0) {
                double delivered = st.battery.discharge_unreserved(deficit);
                deficit -= delivered;
                tally.discharged_kwh += delivered;
            }
            if (deficit > 0.0) {
                if (accounts.balance(agent) > deficit * expected_price) {
                    books.buy_requests.push_back({agent, deficit});
                } else if (battery_mode && st.battery.remaining_capacity() > 0.0) {
                    books.share_requests.push_back(
                        {agent, std::min(deficit, st.battery.remaining_capacity())});
                }
            }
            st.deficit_kwh = deficit;
        }
    }
    return books;
}

namespace {

void apply_trades(StepContext& cx, std::vector<Trade>&& trades) {
    for (const Trade& tr : trades) {
        cx.states[static_cast<std::size_t>(tr.buyer)].deficit_kwh -= tr.amount_kwh;
        if (tr.kind == TradeKind::ResaleOfShare) {
            // Resold energy left a host battery on its way to the buyer.
            cx.tally.discharged_kwh += tr.amount_kwh;
        }
        cx.trades.push_back(tr);
    }
}

void apply_shares(StepContext& cx, std::vector<ShareEvent>&& events) {
    for (const ShareEvent& ev : events) {
        cx.states[static_cast<std::size_t>(ev.consumer)].deficit_kwh -= ev.delivered_kwh;
        cx.tally.charged_kwh += ev.stored_kwh;
        cx.shares.push_back(ev);
    }
}

void settle_with_grid(StepContext& cx, const StepBooks* books) {
    double utility = cx.price.utility_price(cx.t);
    for (std::size_t i = 0; i < cx.states.size(); ++i) {
        double deficit = cx.states[i].deficit_kwh;
        if (deficit > 0.0) {
            double cost = deficit * utility;
            cx.tally.grid_kwh += deficit;
            cx.tally.grid_eur += cost;
            cx.grid_kwh_by_agent[i] += deficit;
            cx.grid_eur_by_agent[i] += cost;
            cx.states[i].deficit_kwh = 0.0;
        } else {
            cx.states[i].deficit_kwh = 0.0;
        }
    }
    if (books != nullptr) {
        for (const Offer& off : books->offers) {
            if (off.remaining_kwh > 0.0) cx.tally.wasted_kwh += off.remaining_kwh;
        }
    }
}

void run_no_trading_step(StepContext& cx) {
    for (std::size_t i = 0; i < cx.states.size(); ++i) {
        const ClientRecord& client = *cx.clients[i];
        cx.tally.production_kwh += client.production_kwh[cx.t];
        cx.tally.consumption_kwh += client.consumption_kwh[cx.t];
        double ee = net_energy(client, cx.t);
        if (ee > 0.0) {
            cx.states[i].excess_kwh = ee;
            cx.tally.wasted_kwh += ee;
        } else if (ee < 0.0) {
            cx.states[i].deficit_kwh = -ee;
        }
    }
    cx.price.step(cx.t, 0, 0);
    settle_with_grid(cx, nullptr);
}

} // namespace

void run_step(StepContext& cx) {
    for (MicrogridState& st : cx.states) {
        st.deficit_kwh = 0.0;
        st.excess_kwh = 0.0;
    }

    // Expiry runs first so hosts can use released energy this very step.
    for (const auto& [host, kwh] : cx.ledger.expire(cx.batteries, cx.t)) {
        cx.tally.released_kwh += kwh;
    }

    if (cx.params.strategy == Strategy::NoTrading) {
        run_no_trading_step(cx);
        return;
    }

    StepBooks books = submit(cx.states, cx.clients, cx.accounts, cx.price.expected_price(),
                             cx.params, cx.ledger, cx.batteries, cx.t, cx.tally);
    double price = cx.price.step(cx.t, books.buy_requests.size(), books.offers.size());

    if (!books.offers.empty()) {
        switch (cx.params.strategy) {
            case Strategy::Trading:
            case Strategy::TradingWithBatteries: {
                apply_trades(cx, match_fcfs(books.offers, books.buy_requests, price, 0.0,
                                            cx.accounts));
                break;
            }
            case Strategy::CentralizedSharing: {
                apply_trades(cx, sell_stored_shares(cx.ledger, cx.batteries, books.buy_requests,
                                                    price, ResaleBeneficiary::Central, cx.accounts,
                                                    cx.t));
                apply_trades(cx, match_fcfs(books.offers, books.buy_requests, price,
                                            cx.params.fee_rate, cx.accounts));
                ShareOptions opt;
                opt.usable_fraction = cx.params.usable_fraction;
                opt.expiry_steps = cx.params.expiry_steps;
                opt.sharer_is_central = true;
                opt.central_funded = true;
                opt.unit_price = price;
                apply_shares(cx, share_out(books.offers, books.share_requests, cx.ledger,
                                           cx.batteries, cx.accounts, cx.t, opt));
                break;
            }
            case Strategy::PeerToPeerSharing: {
                apply_trades(cx, sell_stored_shares(cx.ledger, cx.batteries, books.buy_requests,
                                                    price, ResaleBeneficiary::Sharer, cx.accounts,
                                                    cx.t));
                apply_trades(cx, match_fcfs(books.offers, books.buy_requests, price, 0.0,
                                            cx.accounts));
                ShareOptions opt;
                opt.usable_fraction = cx.params.usable_fraction;
                opt.expiry_steps = cx.params.expiry_steps;
                apply_shares(cx, share_out(books.offers, books.share_requests, cx.ledger,
                                           cx.batteries, cx.accounts, cx.t, opt));
                break;
            }
            case Strategy::SelfishSharing: {
                // Sharing precedes trading; each prosumer shares only up to
                // its foreseen need net of what it already has parked.
                ShareOptions opt;
                opt.usable_fraction = cx.params.usable_fraction;
                opt.expiry_steps = cx.params.expiry_steps;
                opt.prosumer_cap = [&cx](AgentIndex prosumer) {
                    return cx.oracle->needed(prosumer, cx.t) -
                           cx.ledger.live_remaining_by_owner(prosumer, cx.t);
                };
                apply_shares(cx, share_out(books.offers, books.share_requests, cx.ledger,
                                           cx.batteries, cx.accounts, cx.t, opt));
                apply_trades(cx, match_fcfs(books.offers, books.buy_requests, price, 0.0,
                                            cx.accounts));
                break;
            }
            case Strategy::NoTrading:
                break; // handled above
        }
    }
    settle_with_grid(cx, &books);
}

} // namespace gridshare
