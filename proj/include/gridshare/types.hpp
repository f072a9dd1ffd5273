#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridshare {

/// Index of a market participant within its group, in dataset order.
using AgentIndex = std::int32_t;

/// The centralized sharing entity (fee collector, C-SE sharer). Not a client.
inline constexpr AgentIndex kCentralAgent = -1;

enum class Scenario {
    WithinCounty,
    AcrossCounties,
};

enum class Strategy {
    NoTrading,
    Trading,
    TradingWithBatteries,
    CentralizedSharing,
    PeerToPeerSharing,
    SelfishSharing,
};

std::string_view to_string(Scenario s);
std::string_view to_string(Strategy s);
Scenario parse_scenario(std::string_view token);
Strategy parse_strategy(std::string_view token);

/// True for strategies whose agents operate a battery.
constexpr bool uses_batteries(Strategy s) {
    return s != Strategy::NoTrading && s != Strategy::Trading;
}

/// True for strategies with a sharing phase.
constexpr bool uses_sharing(Strategy s) {
    return s == Strategy::CentralizedSharing || s == Strategy::PeerToPeerSharing ||
           s == Strategy::SelfishSharing;
}

/// Simulation window: hourly timesteps, start expressed in hours since the
/// Unix epoch. Timestep t corresponds to start_hour + t.
struct Horizon {
    std::int64_t start_hour = 0;
    std::size_t steps = 0;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : DataError {
    using DataError::DataError;
};

/// SplitMix64 finalizer. Used wherever a reproducible, platform-independent
/// stream of bits is needed (std:: distributions are not pinned across
/// implementations).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a 64-bit over a string, for stable per-client seeding.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Map 64 random bits to a double in [0, 1).
constexpr double uniform_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

} // namespace gridshare
