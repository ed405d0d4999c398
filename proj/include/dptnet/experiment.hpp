#pragma once

#include "dptnet/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dptnet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitInvariant = 2;

// Lines of `dptnet encode`: a comment header, then one rendered entry per line.
std::string encode_text(const EncodeApp& e);

struct BalancePoint {
    BalanceMode mode = BalanceMode::Dpt;
    BitIndex bit;
    bool computed = false;  // Dpt at the bit from compute_toggle_interval
    std::vector<double> goodput_bps;  // one per seed
    double median_bps = 0.0;
};

struct BalanceSweep {
    BitIndex computed_bit;
    std::uint64_t path_rate_bps = 0;
    std::vector<BalancePoint> points;
    std::vector<BalanceResult> runs;  // every run, in point-then-seed order

    const BalancePoint* find(BalanceMode m, std::optional<BitIndex> bit = std::nullopt) const;
};

// Every mode, then Dpt at each sweep bit, over seeds seed..seed+n-1.
BalanceSweep run_balance_sweep(const TopologySpec& topo, const BalanceApp& app, std::uint64_t seed);

double median(std::vector<double> v);

struct RunOutcome {
    int exit_code = kExitOk;
    std::string summary;       // human-readable
    std::string summary_csv;   // also written as summary.csv
    std::vector<std::string> files;
};

// Runs one experiment and writes its CSVs into `out` (created if needed).
// Invariant failures come back as kExitInvariant; bad plans and topologies throw.
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

}  // namespace dptnet
