#include "gridshare/storage.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gridshare {

namespace {

// Absorbs rounding drift from long add/subtract chains so the hard bounds
// stay machine-true. Far below every tolerance used by callers.
constexpr double kSlack = 1e-9;

[[noreturn]] void violated(const char* what) {
    throw std::logic_error(std::string("battery invariant violated: ") + what);
}

void require_non_negative(double amount, const char* op) {
    if (amount < 0.0 || std::isnan(amount)) {
        throw std::invalid_argument(std::string(op) + ": negative amount");
    }
}

} // namespace

Battery::Battery(double capacity_kwh) : capacity_(capacity_kwh) {
    if (capacity_kwh < 0.0 || std::isnan(capacity_kwh)) {
        throw std::invalid_argument("battery capacity must be non-negative");
    }
}

void Battery::check() const {
    if (reserved_ < 0.0 || reserved_ > stored_ || stored_ > capacity_) {
        violated("0 <= reserved <= stored <= capacity");
    }
}

double Battery::charge(double amount) {
    require_non_negative(amount, "charge");
    double accepted = std::min(amount, remaining_capacity());
    stored_ += accepted;
    if (stored_ > capacity_) {
        if (stored_ > capacity_ + kSlack) violated("stored above capacity");
        stored_ = capacity_;
    }
    check();
    return accepted;
}

double Battery::discharge_unreserved(double amount) {
    require_non_negative(amount, "discharge_unreserved");
    double delivered = std::min(amount, unreserved());
    stored_ -= delivered;
    if (stored_ < reserved_) {
        if (stored_ < reserved_ - kSlack) violated("stored below reserved");
        stored_ = reserved_;
    }
    check();
    return delivered;
}

void Battery::add_reserved(double amount) {
    require_non_negative(amount, "add_reserved");
    if (amount > remaining_capacity() + kSlack) violated("reservation above remaining capacity");
    stored_ += amount;
    reserved_ += amount;
    stored_ = std::min(stored_, capacity_);
    reserved_ = std::min(reserved_, stored_);
    check();
}

void Battery::take_reserved(double amount) {
    require_non_negative(amount, "take_reserved");
    if (amount > reserved_ + kSlack) violated("taking more than reserved");
    stored_ -= amount;
    reserved_ -= amount;
    reserved_ = std::max(reserved_, 0.0);
    stored_ = std::max(stored_, reserved_);
    check();
}

void Battery::release_reserved(double amount) {
    require_non_negative(amount, "release_reserved");
    if (amount > reserved_ + kSlack) violated("releasing more than reserved");
    reserved_ -= amount;
    reserved_ = std::max(reserved_, 0.0);
    check();
}

Battery& BatteryMap::at(AgentIndex agent) {
    if (agent < 0 || static_cast<std::size_t>(agent) >= by_agent_.size()) {
        throw std::out_of_range("no battery for agent " + std::to_string(agent));
    }
    return *by_agent_[static_cast<std::size_t>(agent)];
}

const Battery& BatteryMap::at(AgentIndex agent) const {
    return const_cast<BatteryMap*>(this)->at(agent);
}

const ShareRecord& ShareLedger::reserve_store(Battery& host_battery, AgentIndex sharer,
                                              AgentIndex host, double amount, std::size_t t,
                                              std::size_t expiry_steps) {
    require_non_negative(amount, "reserve_store");
    if (amount > host_battery.remaining_capacity() + 1e-9) {
        throw std::invalid_argument("reserve_store: amount exceeds host remaining capacity");
    }
    host_battery.add_reserved(amount);
    ShareRecord rec;
    rec.record_id = next_id_++;
    rec.sharer = sharer;
    rec.host = host;
    rec.initial_kwh = amount;
    rec.remaining_kwh = amount;
    rec.created_at = t;
    // Usable at t+1 .. t+expiry_steps, dead from t+expiry_steps+1 on.
    rec.expires_at = t + expiry_steps + 1;
    records_.push_back(rec);
    return records_.back();
}

double ShareLedger::consume(ShareRecord& record, double amount, BatteryMap& batteries,
                            std::size_t t) {
    require_non_negative(amount, "consume");
    if (!is_live(record, t)) return 0.0;
    double taken = std::min(amount, record.remaining_kwh);
    record.remaining_kwh -= taken;
    if (record.remaining_kwh < 0.0) record.remaining_kwh = 0.0;
    batteries.at(record.host).take_reserved(taken);
    return taken;
}

double ShareLedger::draw_reserved(BatteryMap& batteries, AgentIndex owner,
                                  std::optional<AgentIndex> host, double amount, std::size_t t) {
    require_non_negative(amount, "draw_reserved");
    double drawn = 0.0;
    for (std::size_t i = first_live_; i < records_.size(); ++i) {
        if (amount - drawn <= 0.0) break;
        ShareRecord& rec = records_[i];
        if (rec.sharer != owner) continue;
        if (host && rec.host != *host) continue;
        drawn += consume(rec, amount - drawn, batteries, t);
    }
    return drawn;
}

std::vector<std::pair<AgentIndex, double>> ShareLedger::expire(BatteryMap& batteries,
                                                               std::size_t t) {
    std::vector<std::pair<AgentIndex, double>> released;
    while (first_live_ < records_.size() && records_[first_live_].expires_at <= t) {
        ShareRecord& rec = records_[first_live_];
        if (rec.remaining_kwh > 0.0) {
            double left = rec.remaining_kwh;
            rec.remaining_kwh = 0.0;
            batteries.at(rec.host).release_reserved(left);
            released.emplace_back(rec.host, left);
        }
        ++first_live_;
    }
    return released;
}

double ShareLedger::live_remaining_by_owner(AgentIndex owner, std::size_t t) const {
    double total = 0.0;
    for (std::size_t i = first_live_; i < records_.size(); ++i) {
        const ShareRecord& rec = records_[i];
        if (rec.sharer == owner && is_live(rec, t)) total += rec.remaining_kwh;
    }
    return total;
}

double ShareLedger::live_remaining_total(std::size_t t) const {
    double total = 0.0;
    for (std::size_t i = first_live_; i < records_.size(); ++i) {
        const ShareRecord& rec = records_[i];
        if (is_live(rec, t)) total += rec.remaining_kwh;
    }
    return total;
}

} // namespace gridshare
