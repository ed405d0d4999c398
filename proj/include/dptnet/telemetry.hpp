#pragma once

#include "dptnet/simnet.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dptnet {

// Colour of a packet under the one-bit DPT scheme: the lowest seconds bit.
int telemetry_color_of(NtpTimestamp ts);

// (CS_after - CS_before) - (CR_after - CR_before). A negative value means the
// snapshots straddled a block that was still in flight; that throws
// InvariantViolation.
std::int64_t compute_loss(std::uint64_t cs_before, std::uint64_t cs_after, std::uint64_t cr_before,
                          std::uint64_t cr_after);

struct OneWayDelay {
    Time delay{};
    bool clock_warning = false;  // negative: the two clocks disagree by more than the delay
};
OneWayDelay compute_one_way_delay(NtpTimestamp t1, NtpTimestamp t2);

// (T4 - T1) - (T3 - T2). T1, T4 come from the sender's clock and T2, T3 from
// the receiver's, so any receiver offset cancels.
Time compute_two_way_delay(NtpTimestamp t1, NtpTimestamp t2, NtpTimestamp t3, NtpTimestamp t4);

// A register read back by the controller.
struct TsReading {
    NtpTimestamp dpth{};
    NtpTimestamp local{};
    bool valid = false;
};

// Pairs forward (S1 then S2) and reverse (S2 then S1) readings. Rejects the
// sample unless each pair saw the same packet, i.e. the DPTH values agree.
std::optional<Time> two_way_sample(const TsReading& fwd_s1, const TsReading& fwd_s2, const TsReading& rev_s2,
                                   const TsReading& rev_s1);

enum class TelemetryMethod { Color, Dpt };
const char* to_string(TelemetryMethod m);

struct TelemetryConfig {
    int pairs = 1;
    // Measurement intervals per pair. Each one costs two counter reads, plus a
    // colour toggle for the colour method. Blocks 2..intervals-1 get a loss figure.
    int intervals = 62;
    BitIndex block_bit = BitIndex::sec(1);  // block length = its toggle half period
    std::uint64_t access_rate = 100'000'000;
    std::uint64_t core_rate = 10'000'000;
    Time link_delay = Time::milliseconds(1);
    std::uint32_t queue_cap = kDefaultQueueCap;
    double loss = 0.01;
    std::uint64_t flow_rate = 2'400'000;
    std::uint32_t packet_size = 1500;
    bool measure_delay = false;
    std::uint64_t reverse_rate = 240'000;
    Time base_offset = Time::from_whole_seconds(100);  // every clock starts here
    Time sender_offset{};
    Time receiver_offset{};
    double read_phase = 0.5;  // where in a block counters are read
    Time control_delay = Time::milliseconds(1);
};

struct BlockReport {
    int pair = 0;
    std::uint64_t block = 0;
    std::int64_t loss = 0;
    std::uint64_t truth = 0;  // drops logged by the simulator for the block
    std::optional<Time> one_way;
    std::optional<Time> two_way;
};

struct TelemetryResult {
    TelemetryMethod method = TelemetryMethod::Dpt;
    std::vector<BlockReport> blocks;
    std::uint64_t messages = 0;  // excluding setup
    std::uint64_t data_packets = 0;
    std::uint64_t rejected_samples = 0;
    TraceSummary trace;

    bool exact() const;
    // method,pair,block,loss,truth,one_way_delay,two_way_delay
    std::string csv() const;
};

TelemetryResult run_telemetry(const TelemetryConfig& cfg, TelemetryMethod method, std::uint64_t seed);

}  // namespace dptnet
