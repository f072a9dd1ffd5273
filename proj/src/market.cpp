#include "gridshare/market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gridshare {

namespace {

// Largest quantity the buyer can pay for at `price` such that q * price never
// exceeds the balance, ulps included.
double affordable_quantity(double balance, double price, double wanted) {
    if (price <= 0.0) return wanted; // free energy, balance is no constraint
    double q = std::min(wanted, balance / price);
    while (q > 0.0 && q * price > balance) {
        q = std::nextafter(q, 0.0);
    }
    return q;
}

} // namespace

double Accounts::balance(AgentIndex agent) const {
    if (agent == kCentralAgent) return central_;
    return client_.at(static_cast<std::size_t>(agent));
}

void Accounts::credit(AgentIndex agent, double eur) {
    if (eur < 0.0 || std::isnan(eur)) throw std::invalid_argument("credit: negative amount");
    if (agent == kCentralAgent) {
        central_ += eur;
    } else {
        client_.at(static_cast<std::size_t>(agent)) += eur;
    }
}

void Accounts::debit(AgentIndex agent, double eur) {
    if (eur < 0.0 || std::isnan(eur)) throw std::invalid_argument("debit: negative amount");
    double& slot = agent == kCentralAgent ? central_ : client_.at(static_cast<std::size_t>(agent));
    if (eur > slot) throw std::logic_error("debit: balance would go negative");
    slot -= eur;
}

double Accounts::client_total() const {
    double total = 0.0;
    for (double b : client_) total += b;
    return total;
}

PriceEngine::PriceEngine(std::vector<double> utility, double fit_floor)
    : utility_(std::move(utility)),
      fit_constant_(fit_floor),
      fit_third_of_utility_(fit_floor < 0.0) {
    if (utility_.empty()) throw ConfigError("utility price series is empty");
    for (double p : utility_) {
        if (!(p > 0.0)) throw ConfigError("utility prices must be positive");
    }
    if (!fit_third_of_utility_) {
        for (double p : utility_) {
            if (fit_constant_ > p) {
                throw ConfigError("feed-in floor above the utility price");
            }
        }
    }
    h1_ = h2_ = h3_ = utility_.front();
}

double PriceEngine::utility_price(std::size_t t) const {
    return utility_.size() == 1 ? utility_.front() : utility_.at(t);
}

double PriceEngine::fit_floor(std::size_t t) const {
    return fit_third_of_utility_ ? utility_price(t) / 3.0 : fit_constant_;
}

double PriceEngine::step(std::size_t t, std::size_t request_count, std::size_t offer_count) {
    double p;
    if (offer_count == 0) {
        p = h1_; // no market this step, carry the price so the mean stays defined
    } else {
        double mean = (h1_ + h2_ + h3_) / 3.0;
        double ratio = static_cast<double>(request_count) / static_cast<double>(offer_count);
        p = std::max(fit_floor(t), std::min(utility_price(t), ratio * mean));
    }
    h3_ = h2_;
    h2_ = h1_;
    h1_ = p;
    sum_ += p;
    ++count_;
    return p;
}

double PriceEngine::mean_cleared() const {
    return count_ == 0 ? utility_.front() : sum_ / static_cast<double>(count_);
}

std::vector<Trade> match_fcfs(std::vector<Offer>& offers, std::vector<BuyRequest>& requests,
                              double unit_price, double fee_rate, Accounts& accounts) {
    if (fee_rate < 0.0 || fee_rate >= 1.0) throw std::invalid_argument("fee_rate outside [0, 1)");
    std::vector<Trade> trades;
    std::size_t next_offer = 0;
    for (BuyRequest& req : requests) {
        while (req.remaining_kwh > 0.0 && next_offer < offers.size()) {
            Offer& off = offers[next_offer];
            if (off.remaining_kwh <= 0.0) {
                ++next_offer;
                continue;
            }
            double wanted = std::min(req.remaining_kwh, off.remaining_kwh);
            double q = affordable_quantity(accounts.balance(req.buyer), unit_price, wanted);
            if (q <= 0.0) break; // skip the rest of this request, never overdraw

            double paid = q * unit_price;
            double fee = fee_rate * paid;
            double credit = paid - fee;
            accounts.debit(req.buyer, paid);
            accounts.credit(off.seller, credit);
            accounts.credit(kCentralAgent, fee);

            off.remaining_kwh -= q;
            req.remaining_kwh -= q;
            trades.push_back({TradeKind::PeerTrade, off.seller, req.buyer, q, unit_price, paid,
                              credit, fee});
        }
    }
    return trades;
}

std::vector<Trade> sell_stored_shares(ShareLedger& ledger, BatteryMap& batteries,
                                      std::vector<BuyRequest>& requests, double unit_price,
                                      ResaleBeneficiary beneficiary, Accounts& accounts,
                                      std::size_t t) {
    std::vector<Trade> trades;
    auto records = ledger.possibly_live_records();
    std::size_t next_rec = 0;
    for (BuyRequest& req : requests) {
        while (req.remaining_kwh > 0.0 && next_rec < records.size()) {
            ShareRecord& rec = records[next_rec];
            if (!ledger.is_live(rec, t)) {
                ++next_rec;
                continue;
            }
            double wanted = std::min(req.remaining_kwh, rec.remaining_kwh);
            double q = affordable_quantity(accounts.balance(req.buyer), unit_price, wanted);
            if (q <= 0.0) break;

            AgentIndex credited =
                beneficiary == ResaleBeneficiary::Central ? kCentralAgent : rec.sharer;
            double paid = q * unit_price;
            accounts.debit(req.buyer, paid);
            accounts.credit(credited, paid);

            double taken = ledger.consume(rec, q, batteries, t);
            if (taken != q) throw std::logic_error("resale consumed less than matched");
            req.remaining_kwh -= q;
            trades.push_back({TradeKind::ResaleOfShare, credited, req.buyer, q, unit_price, paid,
                              paid, 0.0});
        }
    }
    return trades;
}

std::vector<ShareEvent> share_out(std::vector<Offer>& offers, std::vector<ShareRequest>& requests,
                                  ShareLedger& ledger, BatteryMap& batteries, Accounts& accounts,
                                  std::size_t t, const ShareOptions& options) {
    if (options.usable_fraction < 0.0 || options.usable_fraction > 1.0) {
        throw std::invalid_argument("usable_fraction outside [0, 1]");
    }
    std::vector<ShareEvent> events;
    for (Offer& off : offers) {
        for (ShareRequest& req : requests) {
            if (off.remaining_kwh <= 0.0) break;
            if (req.remaining_kwh <= 0.0) continue;

            double s = std::min(off.remaining_kwh, req.remaining_kwh);
            if (options.prosumer_cap) {
                s = std::min(s, std::max(0.0, options.prosumer_cap(off.seller)));
            }
            if (options.central_funded) {
                s = affordable_quantity(accounts.balance(kCentralAgent), options.unit_price, s);
            }
            if (s <= 0.0) continue;

            ShareEvent ev;
            ev.prosumer = off.seller;
            ev.consumer = req.consumer;
            ev.matched_kwh = s;
            ev.delivered_kwh = options.usable_fraction * s;
            ev.stored_kwh = s - ev.delivered_kwh; // delivered + stored == s exactly

            if (ev.stored_kwh > 0.0) {
                AgentIndex sharer = options.sharer_is_central ? kCentralAgent : off.seller;
                const ShareRecord& rec = ledger.reserve_store(
                    batteries.at(req.consumer), sharer, req.consumer, ev.stored_kwh, t,
                    options.expiry_steps);
                ev.record_id = rec.record_id;
            }
            if (options.central_funded) {
                double payment = s * options.unit_price;
                accounts.debit(kCentralAgent, payment);
                accounts.credit(off.seller, payment);
                ev.payment_to_prosumer_eur = payment;
            }

            off.remaining_kwh -= s;
            req.remaining_kwh -= s;
            events.push_back(ev);
        }
    }
    return events;
}

} // namespace gridshare
