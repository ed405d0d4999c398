#pragma once

#include "dptnet/simnet.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dptnet {

enum class UpdateMethod { TwoPhase, OnePhase, Periodic };
const char* to_string(UpdateMethod m);

// Leaves (ingress switches, one host each) in an N-switch leaf-spine fabric.
int ingress_count(int switches);

struct UpdateConfig {
    int switches = 12;
    int rounds = 10;
    Time round_period = Time::seconds(1);  // two/one-phase spacing between rounds
    Time control_delay = Time::milliseconds(1);
    Time max_offset = Time::milliseconds(10);  // switch clocks drawn uniformly from +-max_offset
    Time margin = Time::milliseconds(100);     // one-phase: T_thr lead over the controller clock
    std::optional<Time> drain;                 // default: twice the diameter delay
    std::uint64_t link_rate = 100'000'000;
    Time link_delay = Time::milliseconds(1);
    std::uint32_t queue_cap = kDefaultQueueCap;
    std::uint64_t flow_rate = 2'000'000;  // per leaf
    std::uint32_t packet_size = 1000;
    BitIndex round_bit = BitIndex::sec(1);  // periodic: round = its toggle half period
    int path_shift = 1;                     // spine rotation per round; 0 keeps every path
    Time base_offset = Time::from_whole_seconds(1000);
};

struct AuditRow {
    std::uint64_t packet = 0;
    std::optional<std::uint64_t> epoch;
    bool consistent = false;
};

struct RuleSample {
    int round = 0;
    int slot = 0;  // 1..4
    std::size_t rules = 0;  // across all switches
};

struct UpdateResult {
    UpdateMethod method = UpdateMethod::TwoPhase;
    int switches = 0;
    int ingress = 0;
    std::uint64_t messages = 0;  // excluding setup
    std::uint64_t installs = 0;
    std::uint64_t removes = 0;
    std::uint64_t tag_updates = 0;
    std::uint64_t audited = 0;
    std::uint64_t violations = 0;
    std::uint64_t black_holes = 0;
    std::vector<int> aborted_rounds;  // periodic slot overruns
    std::vector<RuleSample> rule_samples;
    std::vector<AuditRow> audit;
    TraceSummary trace;

    // packet_id,epoch_tag,consistent
    std::string audit_csv() const;
};

// Throws PlanError when the schedule cannot be consistent: margin below
// max_offset + control delay, a round shorter than its phases, or a T_thr
// that a switch clock has already passed when the rules would land.
UpdateResult run_update(const UpdateConfig& cfg, UpdateMethod method, std::uint64_t seed);

}  // namespace dptnet
