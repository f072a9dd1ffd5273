#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gridshare/types.hpp"

namespace gridshare {

/// Ideal stationary battery: lossless, no power limits, starts empty.
/// Invariant after every operation: 0 <= reserved <= stored <= capacity.
class Battery {
public:
    Battery() = default;
    explicit Battery(double capacity_kwh);

    double capacity() const { return capacity_; }
    double stored() const { return stored_; }
    double reserved() const { return reserved_; }
    double remaining_capacity() const { return capacity_ - stored_; }
    double unreserved() const { return stored_ - reserved_; }

    /// Store up to `amount`; returns the accepted quantity
    /// min(amount, remaining capacity). Negative amount is a contract
    /// violation (std::invalid_argument).
    double charge(double amount);

    /// Withdraw up to `amount` from the unreserved portion; returns the
    /// delivered quantity min(amount, stored - reserved).
    double discharge_unreserved(double amount);

    // Ledger-side mutations. Only ShareLedger calls these; they keep the
    // battery in step with its hosted records.
    void add_reserved(double amount);     // stored += amount, reserved += amount
    void take_reserved(double amount);    // stored -= amount, reserved -= amount
    void release_reserved(double amount); // reserved -= amount (energy stays, now the host's own)

private:
    void check() const;

    double capacity_ = 0.0;
    double stored_ = 0.0;
    double reserved_ = 0.0;
};

/// Non-owning battery-by-agent lookup. Pointers must outlive the map.
class BatteryMap {
public:
    BatteryMap() = default;
    explicit BatteryMap(std::vector<Battery*> by_agent) : by_agent_(std::move(by_agent)) {}

    Battery& at(AgentIndex agent);
    const Battery& at(AgentIndex agent) const;
    std::size_t size() const { return by_agent_.size(); }

private:
    std::vector<Battery*> by_agent_;
};

/// One parked energy share. `sharer` owns the energy (kCentralAgent under the
/// centralized scheme), `host` provides the battery. A record is live iff
/// the current timestep < expires_at and remaining > 0, making it usable at
/// steps created_at+1 .. created_at+expiry_steps: exactly expiry_steps
/// chances before it falls to the host.
struct ShareRecord {
    std::int64_t record_id = 0;
    AgentIndex sharer = 0;
    AgentIndex host = 0;
    double initial_kwh = 0.0;
    double remaining_kwh = 0.0;
    std::size_t created_at = 0;
    std::size_t expires_at = 0;
};

/// Append-only book of share records, ids strictly increasing. Every change
/// to a record's remaining energy goes through consume()/expire() so the host
/// battery's reserved amount always equals the live hosted total.
class ShareLedger {
public:
    /// Park `amount` in the host battery as a new record expiring after
    /// expiry_steps usable steps. Requires amount <= host remaining capacity.
    /// amount == 0 creates an immediately dead record.
    const ShareRecord& reserve_store(Battery& host_battery, AgentIndex sharer, AgentIndex host,
                                     double amount, std::size_t t, std::size_t expiry_steps);

    /// Take up to `amount` from one live record, syncing the host battery.
    /// Returns the quantity actually taken.
    double consume(ShareRecord& record, double amount, BatteryMap& batteries, std::size_t t);

    /// Consume live records owned by `owner` (optionally one host only) in
    /// FIFO creation order until `amount` is satisfied. Returns the total
    /// drawn.
    double draw_reserved(BatteryMap& batteries, AgentIndex owner, std::optional<AgentIndex> host,
                         double amount, std::size_t t);

    /// Close every record with expires_at <= t and remaining > 0; each host
    /// battery keeps the energy but drops the reservation. Returns (host,
    /// released kWh) pairs in record order. Call once per timestep, before
    /// submissions.
    std::vector<std::pair<AgentIndex, double>> expire(BatteryMap& batteries, std::size_t t);

    bool is_live(const ShareRecord& record, std::size_t t) const {
        return t < record.expires_at && record.remaining_kwh > 0.0;
    }

    /// Total remaining over live records owned by one agent.
    double live_remaining_by_owner(AgentIndex owner, std::size_t t) const;

    /// Total remaining over all live records.
    double live_remaining_total(std::size_t t) const;

    std::span<ShareRecord> records() { return records_; }
    std::span<const ShareRecord> records() const { return records_; }

    /// Suffix of records() that may still contain live entries.
    std::span<ShareRecord> possibly_live_records() {
        return std::span<ShareRecord>(records_).subspan(first_live_);
    }

private:
    std::vector<ShareRecord> records_;
    std::int64_t next_id_ = 0;
    // Records before this index are dead for good. Expiry times are monotone
    // in creation order, so expire() can advance it and later scans skip the
    // dead prefix.
    std::size_t first_live_ = 0;
};

} // namespace gridshare
