#pragma once

#include "dptnet/rng.hpp"
#include "dptnet/timebase.hpp"
#include "dptnet/trange.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dptnet {

using PortId = std::uint32_t;
using RegisterId = std::uint32_t;

inline constexpr std::uint32_t kDefaultDptBytes = 8;

struct FlowKey {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::uint8_t proto = 17;
    std::uint16_t sport = 0;
    std::uint16_t dport = 0;

    FlowKey reversed() const { return {dst, src, proto, dport, sport}; }
    std::uint64_t hash() const;

    friend constexpr auto operator<=>(const FlowKey&, const FlowKey&) = default;
};

enum class PacketKind : std::uint8_t { Data, Ack };

// Epoch tags of every rule a packet fired, for the consistency audit.
struct EpochTrail {
    std::optional<std::uint64_t> epoch;
    bool mixed = false;
    bool untagged = false;  // fired a rule without an epoch tag while auditing

    bool consistent() const { return epoch.has_value() && !mixed && !untagged; }
    friend bool operator==(const EpochTrail&, const EpochTrail&) = default;
};

struct Packet {
    std::uint64_t id = 0;
    FlowKey key;
    std::uint32_t flow = 0;
    PacketKind kind = PacketKind::Data;
    std::uint32_t size = 0;  // bytes on the wire, including any DPTH
    std::optional<NtpTimestamp> dpt;
    std::uint32_t dpt_bytes = 0;
    std::optional<std::uint32_t> version_tag;
    std::optional<std::uint8_t> color;
    std::uint64_t seq = 0;  // data sequence number, or cumulative ack
    Time created_at{};

    // Per-hop metadata, not part of the wire format.
    std::uint32_t hops = 0;
    std::uint64_t color_block = 0;
    EpochTrail trail;

    friend bool operator==(const Packet&, const Packet&) = default;
};

// Attaches the DPTH read from the ingress switch clock; size grows by dpt_bytes
// (0 models a single bit carried in an otherwise unused header field).
Packet ingress_push(Packet pkt, const ClockModel& clock, Time t_true, std::uint32_t dpt_bytes = kDefaultDptBytes);
Packet egress_pop(Packet pkt);

struct KeyMatch {
    std::optional<PortId> in_port;
    std::optional<std::uint32_t> src;
    std::optional<std::uint32_t> dst;
    std::optional<std::uint8_t> proto;
    std::optional<std::uint16_t> sport;
    std::optional<std::uint16_t> dport;
    std::optional<PacketKind> kind;

    bool matches(const Packet& p, PortId port) const;
};

enum class ActionKind { Forward, PushDpt, PopDptAndForward, Drop, RecordTsAndForward, Spray, Hash };

struct Action {
    ActionKind kind = ActionKind::Drop;
    PortId port = 0;
    RegisterId reg = 0;
    std::vector<PortId> group;  // Spray / Hash candidates
    std::optional<RegisterId> record;  // also write the DPTH into this register first

    Action with_record(RegisterId r) const
    {
        Action a = *this;
        a.record = r;
        return a;
    }

    static Action forward(PortId p) { return {ActionKind::Forward, p, 0, {}, {}}; }
    static Action push_dpt() { return {ActionKind::PushDpt, 0, 0, {}, {}}; }
    static Action pop_and_forward(PortId p) { return {ActionKind::PopDptAndForward, p, 0, {}, {}}; }
    static Action drop() { return {}; }
    static Action record_ts_and_forward(PortId p, RegisterId r) { return {ActionKind::RecordTsAndForward, p, r, {}, {}}; }
    // Uniform random port per packet.
    static Action spray(std::vector<PortId> ports) { return {ActionKind::Spray, 0, 0, std::move(ports), {}}; }
    // hash(flow key) mod ports.
    static Action hash(std::vector<PortId> ports) { return {ActionKind::Hash, 0, 0, std::move(ports), {}}; }

    std::vector<PortId> output_ports() const;
};

struct RuleCounters {
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;
};

struct FlowRule {
    std::uint64_t id = 0;  // assigned on install; breaks priority ties (lowest wins)
    std::uint64_t cookie = 0;
    int priority = 0;
    KeyMatch key;
    std::optional<TernaryPattern> ts_match;  // never matches a packet without a DPTH
    std::optional<std::uint32_t> tag_match;
    std::optional<std::uint8_t> color_match;
    Action action;
    RuleCounters counters;
    std::optional<std::uint64_t> epoch_tag;

    bool matches(const Packet& p, PortId in_port) const;
};

class FlowTable {
public:
    std::uint64_t install(FlowRule rule);
    std::size_t remove_cookie(std::uint64_t cookie);
    template <class Pred>
    std::size_t remove_if(Pred pred)
    {
        const auto before = rules_.size();
        std::erase_if(rules_, pred);
        return before - rules_.size();
    }

    // Highest priority, then lowest id. No counter side effects.
    const FlowRule* lookup(const Packet& p, PortId in_port) const;
    const std::vector<FlowRule>& rules() const { return rules_; }
    std::size_t size() const { return rules_.size(); }
    std::uint64_t offered() const { return offered_; }
    std::uint64_t counted_packets() const;

private:
    friend FlowRule& match(const Packet&, FlowTable&, PortId);
    FlowRule* lookup_mut(const Packet& p, PortId in_port);

    std::vector<FlowRule> rules_;  // kept sorted by (priority desc, id asc)
    std::uint64_t next_id_ = 1;
    std::uint64_t offered_ = 0;
};

// Fires the winning rule and bumps its counters. Throws PipelineError when
// nothing matches (tables are expected to carry a lowest-priority default).
FlowRule& match(const Packet& pkt, FlowTable& table, PortId in_port = 0);

// First packet of each block wins: a block is the dpt value shifted right
// by block_lsb's position.
struct TsRegister {
    RegisterId id = 0;
    BitIndex block_lsb = BitIndex::sec(1);
    NtpTimestamp last_dpth{};
    NtpTimestamp local_time{};
    bool valid = false;
    std::uint64_t block = 0;

    std::uint64_t block_of(NtpTimestamp dpth) const { return dpth.raw() >> block_lsb.position(); }
};

// Returns true when the register was written.
bool record_ts(const Packet& pkt, TsRegister& reg, const ClockModel& clock, Time t_true);

struct Verdict {
    bool forward = false;
    PortId port = 0;
    const FlowRule* rule = nullptr;
};

// One pipeline stage of a simulated switch. Mutated only by the event loop.
class Switch {
public:
    Switch(NodeId id, std::string name, ClockModel clock, std::uint64_t seed);

    NodeId id() const { return id_; }
    const std::string& name() const { return name_; }
    const ClockModel& clock() const { return clock_; }
    void set_clock(ClockModel c) { clock_ = c; clock_.owner = id_; }

    FlowTable& table() { return table_; }
    const FlowTable& table() const { return table_; }

    // Host-facing port: arriving packets get a DPTH (when enabled) and the
    // version/colour policy; departing packets lose version and colour marks.
    void set_edge_port(PortId port, bool push_dpt = true);
    bool is_edge(PortId port) const { return edge_.count(port) != 0; }
    void set_dpt_bytes(std::uint32_t bytes) { dpt_bytes_ = bytes; }
    std::uint32_t dpt_bytes() const { return dpt_bytes_; }

    void set_version_policy(std::optional<std::uint32_t> tag) { version_policy_ = tag; }
    std::optional<std::uint32_t> version_policy() const { return version_policy_; }
    void set_color_policy(std::optional<std::uint8_t> color);
    std::optional<std::uint8_t> color_policy() const { return color_policy_; }
    // Bumped on every colour change; identifies the block a coloured packet belongs to.
    std::uint64_t color_block() const { return color_block_; }

    void set_audit_epochs(bool on) { audit_epochs_ = on; }

    TsRegister& add_register(RegisterId id, BitIndex block_lsb);
    TsRegister& reg(RegisterId id);
    const std::map<RegisterId, TsRegister>& registers() const { return registers_; }

    Verdict process(Packet& pkt, PortId in_port, Time t_true);

    std::uint64_t dpt_leaks() const { return dpt_leaks_; }

private:
    NodeId id_;
    std::string name_;
    ClockModel clock_;
    FlowTable table_;
    std::map<PortId, bool> edge_;
    std::uint32_t dpt_bytes_ = kDefaultDptBytes;
    std::optional<std::uint32_t> version_policy_;
    std::optional<std::uint8_t> color_policy_;
    std::uint64_t color_block_ = 0;
    bool audit_epochs_ = false;
    std::map<RegisterId, TsRegister> registers_;
    Rng rng_;
    std::uint64_t dpt_leaks_ = 0;
};

}  // namespace dptnet
