#pragma once

#include "dptnet/control.hpp"
#include "dptnet/pipeline.hpp"
#include "dptnet/rng.hpp"
#include "dptnet/timebase.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dptnet {

enum class EventKind { Arrival, Dequeue, Timer, ControlDelivery };

// Min-heap on (time, seq); seq is handed out at insertion so equal-time
// events run in insertion order.
class Scheduler {
public:
    std::uint64_t schedule(Time t, EventKind kind, std::function<void()> fn);
    // Runs every event with time < limit. Returns the number processed.
    std::uint64_t run_until(Time limit);

    Time now() const { return now_; }
    std::size_t pending() const { return heap_.size(); }
    std::uint64_t processed() const { return processed_; }

private:
    struct Event {
        Time time;
        std::uint64_t seq;
        EventKind kind;
        std::function<void()> fn;
    };
    static bool later(const Event& a, const Event& b)
    {
        return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }

    std::vector<Event> heap_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t processed_ = 0;
    Time now_{};
};

inline constexpr std::uint32_t kDefaultQueueCap = 32;

struct LinkSpec {
    NodeId a = 0;
    std::optional<PortId> a_port;  // next free port when absent
    NodeId b = 0;
    std::optional<PortId> b_port;
    std::uint64_t rate_bps = 10'000'000;
    Time delay = Time::milliseconds(1);
    std::uint32_t queue_cap = kDefaultQueueCap;
    double loss = 0.0;
    Time jitter{};  // extra serialization time, uniform in [0, jitter] per packet
};

struct ChannelCounters {
    std::uint64_t offered = 0;
    std::uint64_t delivered = 0;
    std::uint64_t queue_dropped = 0;
    std::uint64_t loss_dropped = 0;
    std::uint64_t in_flight = 0;
    std::uint64_t bytes_delivered = 0;
};

enum class DropReason { Queue, Loss, Rule };

const char* to_string(DropReason r);

struct DropRecord {
    Time time{};
    std::uint64_t packet = 0;
    std::uint32_t flow = 0;
    PacketKind kind = PacketKind::Data;
    std::int64_t channel = -1;  // -1 for rule drops
    NodeId node = 0;
    DropReason reason = DropReason::Queue;
    std::optional<NtpTimestamp> dpt;
    std::optional<std::uint8_t> color;
    std::uint64_t color_block = 0;
};

struct FlowStats {
    std::uint32_t id = 0;
    std::string kind;
    NodeId src = 0;
    NodeId dst = 0;
    Time start{};
    std::uint64_t sent_packets = 0;
    std::uint64_t sent_bytes = 0;
    std::uint64_t delivered_packets = 0;  // in order, unique
    std::uint64_t delivered_bytes = 0;
    std::uint64_t retransmits = 0;
    std::uint64_t timeouts = 0;
    double goodput_bps = 0.0;
};

struct ChannelStats {
    std::string name;
    NodeId from = 0;
    NodeId to = 0;
    ChannelCounters c;
};

struct RuleStats {
    NodeId node = 0;
    std::uint64_t rule = 0;
    int priority = 0;
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;
};

struct TraceSummary {
    Time duration{};
    std::uint64_t events = 0;
    std::vector<FlowStats> flows;
    std::vector<ChannelStats> channels;
    std::vector<RuleStats> rules;
    std::vector<DropRecord> drops;
    MessageLedger messages;
    std::uint64_t dpt_leaks = 0;

    std::string flows_csv() const;
    std::string links_csv() const;
    std::string rules_csv() const;
    std::string drops_csv() const;
    // Everything above concatenated; used for determinism checks.
    std::string fingerprint() const;
};

struct CbrSpec {
    std::uint32_t id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    std::uint64_t rate_bps = 1'000'000;
    std::uint32_t size = 1500;
    Time start{};
    std::optional<Time> stop;
    std::optional<FlowKey> key;  // derived from endpoints and id when absent
};

struct AimdSpec {
    std::uint32_t id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    std::uint32_t mtu = 1500;
    std::uint32_t ack_size = 64;
    Time start{};
    Time initial_rtt = Time::milliseconds(100);
    Time min_rto = Time::milliseconds(10);
    std::uint32_t nic_backlog = 2;  // packets the sender keeps queued at its NIC
    std::optional<FlowKey> key;
};

class Network;

// Sender/receiver behaviour attached to a flow id. Both ends of a flow share
// one object; packets are dispatched to it by flow id.
class FlowEndpoint {
public:
    virtual ~FlowEndpoint() = default;
    virtual void start(Network& net) = 0;
    virtual void on_packet(Network& net, NodeId host, Packet pkt, Time t) = 0;
    virtual void on_nic_idle(Network&, NodeId, Time) {}
    virtual void finish(Time duration) = 0;
    const FlowStats& stats() const { return stats_; }

protected:
    FlowStats stats_;
};

class Network {
public:
    explicit Network(std::uint64_t seed);
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    NodeId add_switch(std::string name, ClockModel clock = {});
    NodeId add_host(std::string name);
    // Returns the link index; channel 2i runs a->b, 2i+1 runs b->a.
    std::size_t add_link(const LinkSpec& spec);

    bool is_switch(NodeId n) const;
    bool has_node(NodeId n) const { return n < nodes_.size(); }
    const std::string& name(NodeId n) const;
    std::optional<NodeId> find(const std::string& name) const;
    Switch& sw(NodeId n);
    const Switch& sw(NodeId n) const;
    std::vector<NodeId> switches() const;
    std::size_t node_count() const { return nodes_.size(); }

    // Port on `from` whose link reaches `to`.
    PortId port_towards(NodeId from, NodeId to) const;
    // Index of the channel leaving (node, port).
    std::size_t channel_at(NodeId n, PortId p) const;
    std::size_t channel_between(NodeId from, NodeId to) const;
    const ChannelCounters& channel_counters(std::size_t ch) const;
    std::size_t link_count() const { return links_.size(); }
    // As added, with both ports resolved.
    const LinkSpec& link(std::size_t i) const { return links_.at(i); }

    void inject_loss(std::size_t link, double loss_prob, std::uint64_t seed);

    void add_cbr(const CbrSpec& spec);
    void add_aimd(const AimdSpec& spec);
    void add_flow(std::unique_ptr<FlowEndpoint> flow, std::uint32_t id);

    // Timer in simulation time.
    void at(Time t, std::function<void(Time)> fn);
    // Queues a controller message. `apply` runs on the target switch at
    // delivery. Delivery is FIFO per target.
    void send_control(MessageKind kind, NodeId target, std::string app, std::function<void(Switch&, Time)> apply,
                      std::uint64_t round = 0, bool setup = false);
    Time control_delay() const { return control_delay_; }
    void set_control_delay(Time d) { control_delay_ = d; }
    const MessageLedger& ledger() const { return ledger_; }

    // Sends from a host NIC; returns false if the NIC queue dropped it.
    bool host_send(NodeId host, Packet pkt, Time t);
    std::size_t nic_backlog(NodeId host) const;
    std::uint64_t next_packet_id() { return next_packet_id_++; }

    // Observers; set before run().
    std::function<void(const Packet&, NodeId, Time)> on_deliver;
    std::function<void(const Packet&, NodeId, const FlowRule&, Time)> on_rule_drop;

    // Dangling ports (rule outputs or host attachments without a link) throw TopologyError.
    void validate() const;
    TraceSummary run(Time duration);

    Time now() const { return sched_.now(); }
    std::uint64_t seed() const { return seed_; }
    const std::vector<DropRecord>& drops() const { return drops_; }

private:
    struct Channel {
        std::string name;
        NodeId from = 0;
        PortId from_port = 0;
        NodeId to = 0;
        PortId to_port = 0;
        std::uint64_t rate_bps = 0;
        Time delay{};
        std::uint32_t queue_cap = 0;
        double loss = 0.0;
        Time jitter{};
        Rng loss_rng;
        Rng jitter_rng;
        std::deque<Packet> queue;
        bool busy = false;
        ChannelCounters c;
    };
    struct Node {
        std::string name;
        std::unique_ptr<Switch> sw;  // null for hosts
        std::map<PortId, std::size_t> out;  // port -> channel
        PortId next_port = 1;
    };

    void enqueue(std::size_t ch, Packet pkt, Time t);
    void start_tx(std::size_t ch, Time t);
    void tx_done(std::size_t ch, Packet pkt, Time t);
    void arrive(NodeId n, PortId port, Packet pkt, Time t);
    void log_drop(const Packet& p, std::int64_t ch, NodeId node, DropReason r, Time t);

    std::uint64_t seed_;
    Scheduler sched_;
    std::vector<Node> nodes_;
    std::vector<LinkSpec> links_;
    std::vector<Channel> channels_;
    std::map<std::uint32_t, std::unique_ptr<FlowEndpoint>> flows_;
    std::vector<DropRecord> drops_;
    MessageLedger ledger_;
    std::map<NodeId, Time> last_delivery_;
    Time control_delay_ = Time::milliseconds(1);
    std::uint64_t next_packet_id_ = 1;
    bool ran_ = false;
};

// Topology by node name, as written in experiment configs.
struct NodeSpec {
    std::string name;
    bool is_switch = true;
    Time clock_offset{};
    double drift_ppm = 0.0;
};

struct NamedLink {
    std::string a;
    std::string b;
    LinkSpec spec;  // a/b node ids are filled in when built
};

struct TopologySpec {
    std::vector<NodeSpec> nodes;
    std::vector<NamedLink> links;
};

// Adds every node and link; node ids follow declaration order.
void build_topology(Network& net, const TopologySpec& topo);

// Flow key used when a spec leaves it out: UDP for CBR, TCP for AIMD.
FlowKey default_flow_key(NodeId src, NodeId dst, std::uint32_t flow, std::uint8_t proto);

}  // namespace dptnet
