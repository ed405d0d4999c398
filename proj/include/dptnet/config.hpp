#pragma once

#include "dptnet/loadbalance.hpp"
#include "dptnet/simnet.hpp"
#include "dptnet/telemetry.hpp"
#include "dptnet/updates.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dptnet {

// Sectioned key = value text, before any interpretation.
struct RawEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct RawSection {
    std::string name;
    int line = 0;
    std::vector<RawEntry> entries;
};

struct RawConfig {
    std::vector<RawSection> sections;
};

// Syntax only: headers, key = value, # comments. Throws ConfigError.
RawConfig parse_raw(std::string_view text);

// Sets `section.key` (every section of that name) or `section#i.key` (the
// i-th, 1-based) to value, adding the key where it is missing.
void apply_override(RawConfig& raw, const std::string& path, const std::string& value);

// Value parsers shared with the CLI. Each returns nullopt on malformed input.
std::optional<Time> parse_duration(std::string_view s);
std::optional<std::uint64_t> parse_rate(std::string_view s);
std::optional<std::uint64_t> parse_uint(std::string_view s);
std::optional<double> parse_double(std::string_view s);
std::optional<bool> parse_bool(std::string_view s);
// Seconds, possibly fractional, to a 64-bit NTP value; exact for decimal input.
std::optional<std::uint64_t> parse_ntp_seconds(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');

enum class ExperimentKind { Telemetry, Updates, LoadBalance, Encode };
const char* to_string(ExperimentKind k);

struct FlowConfig {
    std::string kind = "aimd";  // aimd | cbr
    std::string src;
    std::string dst;
    std::uint64_t rate_bps = 0;
    std::uint32_t mtu = 1500;
    int count = 1;
    int line = 0;
};

struct TelemetryApp {
    TelemetryConfig base;
    std::vector<int> pairs{1};
    std::vector<TelemetryMethod> methods{TelemetryMethod::Color, TelemetryMethod::Dpt};
};

struct UpdatesApp {
    UpdateConfig base;
    std::vector<int> switches{12};
    std::vector<UpdateMethod> methods{UpdateMethod::TwoPhase, UpdateMethod::OnePhase};
};

struct BalanceApp {
    BalanceSetup setup;
    std::vector<BalanceMode> modes{BalanceMode::Dpt, BalanceMode::Rps, BalanceMode::Ecmp};
    std::vector<BitIndex> sweep_bits;  // extra Dpt runs besides the computed bit
    int seeds = 1;
};

struct PeriodicSpec {
    int slot_bits = 1;
    std::set<std::uint32_t> slots;
};

struct EncodeApp {
    std::optional<std::uint64_t> extremal;  // NTP raw of T0
    std::optional<PeriodicSpec> periodic;
    int width = 32;                         // top bits of the timestamp
    BitIndex bit = BitIndex::frac(32);      // periodic slot lsb
    bool always = false;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Telemetry;
    std::uint64_t seed = 1;
    TopologySpec topology;
    std::vector<FlowConfig> flows;
    TelemetryApp telemetry;
    UpdatesApp updates;
    BalanceApp balance;
    EncodeApp encode;
};

// Interprets a raw config, collecting every problem (unknown keys, bad
// values, dangling node references) into one ConfigError.
ExperimentConfig validate_config(const RawConfig& raw);
ExperimentConfig parse_config(std::string_view text);

}  // namespace dptnet
