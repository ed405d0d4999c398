#pragma once

#include "dptnet/pipeline.hpp"
#include "dptnet/rng.hpp"
#include "dptnet/simnet.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dptnet {

struct ToggleInterval {
    BitIndex bit;
    Time half_period;  // time between toggles of `bit`
    Time inter_packet; // mtu at the aggregate path rate
};

// Highest bit whose toggle half period does not exceed the inter-packet time
// of back-to-back mtu packets at `total_path_rate_bps`.
ToggleInterval compute_toggle_interval(std::uint64_t total_path_rate_bps, std::uint32_t mtu);

enum class BalanceMode { Dpt, Rps, Ecmp };
const char* to_string(BalanceMode m);

struct BalancePolicy {
    BalanceMode mode = BalanceMode::Dpt;
    std::vector<std::uint32_t> weights;  // one per path
    BitIndex slot_lsb = BitIndex::frac(32);
    int slot_bits = 1;
    std::vector<std::size_t> slot_table;  // slot -> path, Dpt only

    std::size_t paths() const { return weights.size(); }
    std::vector<std::uint32_t> slots_of(std::size_t path) const;
};

// Weights must sum to a power of two; each path owns that many of the
// 2^slot_bits slots, interleaved so equal weights alternate.
BalancePolicy make_dpt_policy(std::vector<std::uint32_t> weights, BitIndex slot_lsb);
BalancePolicy make_rps_policy(std::size_t paths);
BalancePolicy make_ecmp_policy(std::size_t paths);

// Path index for a packet. Rps draws from `rng`, the same way a Spray action does.
std::size_t balance(const BalancePolicy& policy, const Packet& pkt, Rng& rng);

// Rules realising `policy` on ports[i] for path i. `base` supplies key, priority
// and cookie; a lower-priority hash rule catches packets without a DPTH.
std::vector<FlowRule> balance_rules(const BalancePolicy& policy, const std::vector<PortId>& ports,
                                    const FlowRule& base);

struct BalanceSetup {
    std::string src = "src";
    std::string dst = "dst";
    std::string balancer = "S2";
    int flows = 1;
    std::uint32_t mtu = 1500;
    Time min_rto = Time::milliseconds(10);
    std::vector<std::uint32_t> weights;  // empty: one each
    std::optional<BitIndex> bit;         // Dpt slot bit; computed when absent
    Time duration = Time::seconds(10);
};

struct BalanceResult {
    BalanceMode mode = BalanceMode::Dpt;
    BitIndex bit;
    Time half_period{};
    double goodput_bps = 0.0;  // summed over flows
    std::uint64_t path_rate_bps = 0;  // sum of the balanced links
    std::vector<std::uint64_t> path_packets;
    std::uint64_t retransmits = 0;
    std::uint64_t timeouts = 0;
    TraceSummary trace;
};

// src - S1 - S2 = two 10 Mb/s links = S3 - dst, with jittered access.
TopologySpec two_path_topology();

// Shortest-path routes for the data and ACK directions; the balancer
// splits data across every next hop on a shortest path to dst.
BalanceResult run_balance(const TopologySpec& topo, const BalanceSetup& setup, BalanceMode mode, std::uint64_t seed);

// mode,bit,half_period_us,goodput_bps,utilisation,retransmits,timeouts,path_packets
std::string balance_csv_header();
std::string balance_csv_row(const BalanceResult& r);

}  // namespace dptnet
