#include "dptnet/simnet.hpp"

#include "dptnet/error.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace dptnet {

// ---- scheduler ----

std::uint64_t Scheduler::schedule(Time t, EventKind kind, std::function<void()> fn)
{
    if (t < now_)
        throw Error("event scheduled in the past");
    const auto seq = next_seq_++;
    heap_.push_back({t, seq, kind, std::move(fn)});
    std::push_heap(heap_.begin(), heap_.end(), later);
    return seq;
}

std::uint64_t Scheduler::run_until(Time limit)
{
    std::uint64_t n = 0;
    while (!heap_.empty() && heap_.front().time < limit) {
        std::pop_heap(heap_.begin(), heap_.end(), later);
        Event ev = std::move(heap_.back());
        heap_.pop_back();
        now_ = ev.time;
        ev.fn();
        ++n;
        ++processed_;
    }
    return n;
}

const char* to_string(DropReason r)
{
    switch (r) {
    case DropReason::Queue:
        return "queue";
    case DropReason::Loss:
        return "loss";
    case DropReason::Rule:
        return "rule";
    }
    return "?";
}

FlowKey default_flow_key(NodeId src, NodeId dst, std::uint32_t flow, std::uint8_t proto)
{
    return {src, dst, proto, static_cast<std::uint16_t>(10000 + flow), 5001};
}

namespace {

Time serialization(std::uint32_t bytes, std::uint64_t rate_bps)
{
    const auto num = (static_cast<__int128>(bytes) * 8) << 32;
    return Time::from_ticks(static_cast<std::int64_t>(num / rate_bps));
}

std::string fmt_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

// ---- traffic ----

class CbrFlow : public FlowEndpoint {
public:
    explicit CbrFlow(const CbrSpec& s) : s_(s)
    {
        key_ = s.key.value_or(default_flow_key(s.src, s.dst, s.id, 17));
        stats_.id = s.id;
        stats_.kind = "cbr";
        stats_.src = s.src;
        stats_.dst = s.dst;
        stats_.start = s.start;
    }

    void start(Network& net) override { schedule(net, 0); }

    void on_packet(Network&, NodeId host, Packet pkt, Time) override
    {
        if (host != s_.dst || pkt.kind != PacketKind::Data)
            return;
        ++stats_.delivered_packets;
        stats_.delivered_bytes += pkt.size;
    }

    void finish(Time duration) override
    {
        const double active = (duration - s_.start).to_seconds();
        stats_.goodput_bps = active > 0 ? static_cast<double>(stats_.delivered_bytes) * 8.0 / active : 0.0;
    }

private:
    Time send_time(std::uint64_t n) const
    {
        const auto num = (static_cast<__int128>(n) * s_.size * 8) << 32;
        return s_.start + Time::from_ticks(static_cast<std::int64_t>(num / s_.rate_bps));
    }

    void schedule(Network& net, std::uint64_t n)
    {
        const Time t = send_time(n);
        if (s_.stop && t >= *s_.stop)
            return;
        net.at(t, [this, &net, n](Time now) {
            Packet p;
            p.id = net.next_packet_id();
            p.key = key_;
            p.flow = s_.id;
            p.size = s_.size;
            p.seq = n;
            p.created_at = now;
            ++stats_.sent_packets;
            stats_.sent_bytes += p.size;
            net.host_send(s_.src, std::move(p), now);
            schedule(net, n + 1);
        });
    }

    CbrSpec s_;
    FlowKey key_;
};

// Window-based AIMD with slow start, triple-dupack fast retransmit and a
// coarse retransmit timer (2 x smoothed RTT, go-back-N on expiry).
class AimdFlow : public FlowEndpoint {
public:
    explicit AimdFlow(const AimdSpec& s) : s_(s), rtt_est_(s.initial_rtt)
    {
        key_ = s.key.value_or(default_flow_key(s.src, s.dst, s.id, 6));
        stats_.id = s.id;
        stats_.kind = "aimd";
        stats_.src = s.src;
        stats_.dst = s.dst;
        stats_.start = s.start;
    }

    void start(Network& net) override
    {
        net.at(s_.start, [this, &net](Time t) { try_send(net, t); });
    }

    void on_packet(Network& net, NodeId host, Packet pkt, Time t) override
    {
        if (host == s_.dst && pkt.kind == PacketKind::Data)
            receive(net, pkt, t);
        else if (host == s_.src && pkt.kind == PacketKind::Ack)
            on_ack(net, pkt.seq, t);
    }

    void on_nic_idle(Network& net, NodeId host, Time t) override
    {
        if (host == s_.src && t >= s_.start)
            try_send(net, t);
    }

    void finish(Time duration) override
    {
        const double active = (duration - s_.start).to_seconds();
        stats_.goodput_bps = active > 0 ? static_cast<double>(stats_.delivered_bytes) * 8.0 / active : 0.0;
    }

    double cwnd() const { return cwnd_; }

private:
    std::uint64_t window() const { return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(cwnd_)); }

    void try_send(Network& net, Time t)
    {
        while (next_seq_ < snd_una_ + window() && net.nic_backlog(s_.src) < s_.nic_backlog) {
            send_data(net, next_seq_, t);
            ++next_seq_;
        }
    }

    void send_data(Network& net, std::uint64_t seq, Time t)
    {
        if (seq < max_sent_) {
            retx_.insert(seq);
            ++stats_.retransmits;
        } else {
            max_sent_ = seq + 1;
            sent_at_[seq] = t;
        }
        Packet p;
        p.id = net.next_packet_id();
        p.key = key_;
        p.flow = s_.id;
        p.size = s_.mtu;
        p.seq = seq;
        p.created_at = t;
        ++stats_.sent_packets;
        stats_.sent_bytes += p.size;
        net.host_send(s_.src, std::move(p), t);
        if (!rto_armed_)
            arm_rto(net, t);
    }

    void arm_rto(Network& net, Time t)
    {
        const auto gen = ++rto_gen_;
        rto_armed_ = true;
        const Time rto = std::max(rtt_est_ * 2 * (std::int64_t{1} << backoff_), s_.min_rto);
        net.at(t + rto, [this, &net, gen](Time now) {
            if (gen == rto_gen_)
                on_timeout(net, now);
        });
    }

    void disarm_rto()
    {
        ++rto_gen_;
        rto_armed_ = false;
    }

    void on_timeout(Network& net, Time t)
    {
        rto_armed_ = false;
        if (snd_una_ >= max_sent_)
            return;
        ++stats_.timeouts;
        ssthresh_ = std::max(cwnd_ / 2, 1.0);
        cwnd_ = 1;
        next_seq_ = snd_una_;
        recovery_ = false;
        dupacks_ = 0;
        backoff_ = std::min(backoff_ + 1, 6);
        try_send(net, t);
        if (!rto_armed_)
            arm_rto(net, t);
    }

    void on_ack(Network& net, std::uint64_t ack, Time t)
    {
        if (ack > snd_una_) {
            if (!retx_.count(ack - 1)) {
                if (auto it = sent_at_.find(ack - 1); it != sent_at_.end()) {
                    const Time sample = t - it->second;
                    rtt_est_ = have_rtt_ ? (rtt_est_ * 7 + sample) / 8 : sample;
                    have_rtt_ = true;
                }
            }
            sent_at_.erase(sent_at_.begin(), sent_at_.lower_bound(ack));
            retx_.erase(retx_.begin(), retx_.lower_bound(ack));
            const auto newly = ack - snd_una_;
            snd_una_ = ack;
            next_seq_ = std::max(next_seq_, snd_una_);
            backoff_ = 0;
            dupacks_ = 0;
            if (recovery_) {
                if (ack >= recover_) {
                    recovery_ = false;
                    cwnd_ = ssthresh_;
                } else {
                    send_data(net, snd_una_, t);  // partial ack
                }
            } else {
                for (std::uint64_t i = 0; i < newly; ++i)
                    cwnd_ += cwnd_ < ssthresh_ ? 1.0 : 1.0 / cwnd_;
            }
            disarm_rto();
            if (snd_una_ < max_sent_)
                arm_rto(net, t);
        } else if (ack == snd_una_ && snd_una_ < max_sent_) {
            if (++dupacks_ == 3 && !recovery_) {
                ssthresh_ = std::max(cwnd_ / 2, 1.0);
                cwnd_ = ssthresh_;
                recovery_ = true;
                recover_ = max_sent_;
                send_data(net, snd_una_, t);
            }
        }
        try_send(net, t);
    }

    void receive(Network& net, const Packet& pkt, Time t)
    {
        if (pkt.seq == rcv_nxt_) {
            std::uint64_t n = 1;
            ++rcv_nxt_;
            while (!ooo_.empty() && *ooo_.begin() == rcv_nxt_) {
                ooo_.erase(ooo_.begin());
                ++rcv_nxt_;
                ++n;
            }
            stats_.delivered_packets += n;
            stats_.delivered_bytes += n * s_.mtu;
        } else if (pkt.seq > rcv_nxt_) {
            ooo_.insert(pkt.seq);
        }
        Packet ack;
        ack.id = net.next_packet_id();
        ack.key = key_.reversed();
        ack.flow = s_.id;
        ack.kind = PacketKind::Ack;
        ack.size = s_.ack_size;
        ack.seq = rcv_nxt_;
        ack.created_at = t;
        net.host_send(s_.dst, std::move(ack), t);
    }

    AimdSpec s_;
    FlowKey key_;

    double cwnd_ = 1.0;
    double ssthresh_ = 1e9;
    std::uint64_t next_seq_ = 0;
    std::uint64_t snd_una_ = 0;
    std::uint64_t max_sent_ = 0;
    int dupacks_ = 0;
    bool recovery_ = false;
    std::uint64_t recover_ = 0;
    Time rtt_est_;
    bool have_rtt_ = false;
    int backoff_ = 0;
    std::uint64_t rto_gen_ = 0;
    bool rto_armed_ = false;
    std::map<std::uint64_t, Time> sent_at_;
    std::set<std::uint64_t> retx_;

    std::uint64_t rcv_nxt_ = 0;
    std::set<std::uint64_t> ooo_;
};

}  // namespace

// ---- network ----

Network::Network(std::uint64_t seed) : seed_(seed) {}

NodeId Network::add_switch(std::string name, ClockModel clock)
{
    const auto id = static_cast<NodeId>(nodes_.size());
    Node n;
    n.name = name;
    n.sw = std::make_unique<Switch>(id, std::move(name), clock, seed_);
    nodes_.push_back(std::move(n));
    return id;
}

NodeId Network::add_host(std::string name)
{
    const auto id = static_cast<NodeId>(nodes_.size());
    Node n;
    n.name = std::move(name);
    nodes_.push_back(std::move(n));
    return id;
}

bool Network::is_switch(NodeId n) const
{
    return has_node(n) && nodes_[n].sw != nullptr;
}

const std::string& Network::name(NodeId n) const
{
    if (!has_node(n))
        throw TopologyError("unknown node " + std::to_string(n));
    return nodes_[n].name;
}

std::optional<NodeId> Network::find(const std::string& name) const
{
    for (NodeId i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].name == name)
            return i;
    return std::nullopt;
}

Switch& Network::sw(NodeId n)
{
    if (!is_switch(n))
        throw TopologyError("node " + std::to_string(n) + " is not a switch");
    return *nodes_[n].sw;
}

const Switch& Network::sw(NodeId n) const
{
    if (!is_switch(n))
        throw TopologyError("node " + std::to_string(n) + " is not a switch");
    return *nodes_[n].sw;
}

std::vector<NodeId> Network::switches() const
{
    std::vector<NodeId> out;
    for (NodeId i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].sw)
            out.push_back(i);
    return out;
}

std::size_t Network::add_link(const LinkSpec& spec)
{
    if (!has_node(spec.a) || !has_node(spec.b))
        throw TopologyError("link references an unknown node");
    if (spec.a == spec.b)
        throw TopologyError("link from " + name(spec.a) + " to itself");
    if (spec.rate_bps == 0)
        throw TopologyError("link rate must be positive");
    if (spec.delay < Time{} || spec.jitter < Time{})
        throw TopologyError("negative link delay or jitter");
    if (spec.loss < 0 || spec.loss > 1)
        throw TopologyError("loss probability outside [0,1]");

    auto claim = [this](NodeId n, std::optional<PortId> want) {
        Node& node = nodes_[n];
        const PortId p = want.value_or(node.next_port);
        if (p == 0 || node.out.count(p))
            throw TopologyError("port " + std::to_string(p) + " on " + node.name + " is already in use");
        node.next_port = std::max(node.next_port, p + 1);
        if (!node.sw && !node.out.empty())
            throw TopologyError("host " + node.name + " has more than one link");
        return p;
    };
    const PortId pa = claim(spec.a, spec.a_port);
    const PortId pb = claim(spec.b, spec.b_port);
    const auto link = links_.size();
    LinkSpec stored = spec;
    stored.a_port = pa;
    stored.b_port = pb;
    links_.push_back(stored);

    auto make = [&](NodeId from, PortId fp, NodeId to, PortId tp, std::uint64_t dir) {
        Channel c;
        c.name = nodes_[from].name + "-" + nodes_[to].name;
        c.from = from;
        c.from_port = fp;
        c.to = to;
        c.to_port = tp;
        c.rate_bps = spec.rate_bps;
        c.delay = spec.delay;
        c.queue_cap = spec.queue_cap;
        c.loss = spec.loss;
        c.jitter = spec.jitter;
        c.loss_rng = Rng::derive(seed_, {0x1055ULL, link, dir});
        c.jitter_rng = Rng::derive(seed_, {0x717eULL, link, dir});
        nodes_[from].out[fp] = channels_.size();
        channels_.push_back(std::move(c));
    };
    make(spec.a, pa, spec.b, pb, 0);
    make(spec.b, pb, spec.a, pa, 1);

    if (is_switch(spec.a) && !is_switch(spec.b))
        nodes_[spec.a].sw->set_edge_port(pa, true);
    if (is_switch(spec.b) && !is_switch(spec.a))
        nodes_[spec.b].sw->set_edge_port(pb, true);
    return link;
}

PortId Network::port_towards(NodeId from, NodeId to) const
{
    return channels_[channel_between(from, to)].from_port;
}

std::size_t Network::channel_at(NodeId n, PortId p) const
{
    if (!has_node(n))
        throw TopologyError("unknown node " + std::to_string(n));
    auto it = nodes_[n].out.find(p);
    if (it == nodes_[n].out.end())
        throw TopologyError("dangling port " + std::to_string(p) + " on " + nodes_[n].name);
    return it->second;
}

std::size_t Network::channel_between(NodeId from, NodeId to) const
{
    if (!has_node(from))
        throw TopologyError("unknown node " + std::to_string(from));
    for (const auto& [port, ch] : nodes_[from].out)
        if (channels_[ch].to == to)
            return ch;
    throw TopologyError("no link from " + name(from) + " to " + name(to));
}

const ChannelCounters& Network::channel_counters(std::size_t ch) const
{
    return channels_.at(ch).c;
}

void Network::inject_loss(std::size_t link, double loss_prob, std::uint64_t seed)
{
    if (link >= links_.size())
        throw TopologyError("unknown link " + std::to_string(link));
    if (!(loss_prob >= 0 && loss_prob <= 1))
        throw TopologyError("loss probability outside [0,1]");
    for (std::uint64_t dir = 0; dir < 2; ++dir) {
        auto& c = channels_[2 * link + dir];
        c.loss = loss_prob;
        c.loss_rng = Rng::derive(seed, {0x1055ULL, link, dir});
    }
}

void Network::add_flow(std::unique_ptr<FlowEndpoint> flow, std::uint32_t id)
{
    if (flows_.count(id))
        throw TopologyError("duplicate flow id " + std::to_string(id));
    flows_[id] = std::move(flow);
}

void Network::add_cbr(const CbrSpec& spec)
{
    if (spec.rate_bps == 0 || spec.size == 0)
        throw TopologyError("CBR flow needs a positive rate and size");
    if (is_switch(spec.src) || is_switch(spec.dst) || !has_node(spec.src) || !has_node(spec.dst))
        throw TopologyError("flow endpoints must be hosts");
    add_flow(std::make_unique<CbrFlow>(spec), spec.id);
}

void Network::add_aimd(const AimdSpec& spec)
{
    if (spec.mtu == 0)
        throw TopologyError("AIMD flow needs a positive mtu");
    if (is_switch(spec.src) || is_switch(spec.dst) || !has_node(spec.src) || !has_node(spec.dst))
        throw TopologyError("flow endpoints must be hosts");
    add_flow(std::make_unique<AimdFlow>(spec), spec.id);
}

void Network::at(Time t, std::function<void(Time)> fn)
{
    sched_.schedule(t, EventKind::Timer, [fn = std::move(fn), t] { fn(t); });
}

void Network::send_control(MessageKind kind, NodeId target, std::string app, std::function<void(Switch&, Time)> apply,
                           std::uint64_t round, bool setup)
{
    Switch& s = sw(target);
    const Time sent = sched_.now();
    Time deliver = sent + control_delay_;
    if (auto it = last_delivery_.find(target); it != last_delivery_.end())
        deliver = std::max(deliver, it->second);
    last_delivery_[target] = deliver;
    ledger_.append({sent, deliver, kind, target, std::move(app), round, setup});
    sched_.schedule(deliver, EventKind::ControlDelivery, [&s, apply = std::move(apply), deliver] { apply(s, deliver); });
}

std::size_t Network::nic_backlog(NodeId host) const
{
    const auto& out = nodes_.at(host).out;
    if (out.empty())
        return 0;
    const auto& c = channels_[out.begin()->second];
    return c.queue.size() + (c.busy ? 1 : 0);
}

bool Network::host_send(NodeId host, Packet pkt, Time t)
{
    const auto& out = nodes_.at(host).out;
    if (out.empty())
        throw TopologyError("host " + nodes_[host].name + " has no link");
    const auto ch = out.begin()->second;
    const auto before = channels_[ch].c.queue_dropped;
    enqueue(ch, std::move(pkt), t);
    return channels_[ch].c.queue_dropped == before;
}

void Network::log_drop(const Packet& p, std::int64_t ch, NodeId node, DropReason r, Time t)
{
    drops_.push_back({t, p.id, p.flow, p.kind, ch, node, r, p.dpt, p.color, p.color_block});
}

void Network::enqueue(std::size_t ch, Packet pkt, Time t)
{
    Channel& c = channels_[ch];
    ++c.c.offered;
    if (!c.busy) {
        ++c.c.in_flight;
        c.queue.push_back(std::move(pkt));
        start_tx(ch, t);
        return;
    }
    if (c.queue.size() >= c.queue_cap) {
        ++c.c.queue_dropped;
        log_drop(pkt, static_cast<std::int64_t>(ch), c.from, DropReason::Queue, t);
        return;
    }
    ++c.c.in_flight;
    c.queue.push_back(std::move(pkt));
}

void Network::start_tx(std::size_t ch, Time t)
{
    Channel& c = channels_[ch];
    Packet p = std::move(c.queue.front());
    c.queue.pop_front();
    c.busy = true;
    Time ser = serialization(p.size, c.rate_bps);
    if (c.jitter > Time{})
        ser += Time::from_ticks(static_cast<std::int64_t>(c.jitter_rng.below(static_cast<std::uint64_t>(c.jitter.ticks()) + 1)));
    sched_.schedule(t + ser, EventKind::Dequeue, [this, ch, p = std::move(p), done = t + ser]() mutable {
        tx_done(ch, std::move(p), done);
    });
}

void Network::tx_done(std::size_t ch, Packet pkt, Time t)
{
    Channel& c = channels_[ch];
    c.busy = false;
    bool lost = false;
    if (c.loss >= 1.0)
        lost = true;
    else if (c.loss > 0.0)
        lost = c.loss_rng.bernoulli(c.loss);
    if (lost) {
        --c.c.in_flight;
        ++c.c.loss_dropped;
        log_drop(pkt, static_cast<std::int64_t>(ch), c.from, DropReason::Loss, t);
    } else {
        const NodeId to = c.to;
        const PortId tp = c.to_port;
        sched_.schedule(t + c.delay, EventKind::Arrival, [this, ch, to, tp, p = std::move(pkt), at = t + c.delay]() mutable {
            Channel& cc = channels_[ch];
            --cc.c.in_flight;
            ++cc.c.delivered;
            cc.c.bytes_delivered += p.size;
            arrive(to, tp, std::move(p), at);
        });
    }
    if (!c.queue.empty())
        start_tx(ch, t);
    const NodeId from = channels_[ch].from;
    if (!is_switch(from))
        for (auto& [id, f] : flows_)
            f->on_nic_idle(*this, from, t);
}

void Network::arrive(NodeId n, PortId port, Packet pkt, Time t)
{
    Node& node = nodes_[n];
    if (!node.sw) {
        if (on_deliver)
            on_deliver(pkt, n, t);
        if (auto it = flows_.find(pkt.flow); it != flows_.end())
            it->second->on_packet(*this, n, std::move(pkt), t);
        return;
    }
    const Verdict v = node.sw->process(pkt, port, t);
    if (!v.forward) {
        log_drop(pkt, -1, n, DropReason::Rule, t);
        if (on_rule_drop && v.rule)
            on_rule_drop(pkt, n, *v.rule, t);
        return;
    }
    enqueue(channel_at(n, v.port), std::move(pkt), t);
}

void Network::validate() const
{
    for (NodeId i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (!n.sw) {
            if (n.out.empty())
                throw TopologyError("dangling host " + n.name + ": no link");
            continue;
        }
        for (const auto& r : n.sw->table().rules())
            for (PortId p : r.action.output_ports())
                if (!n.out.count(p))
                    throw TopologyError("dangling port " + std::to_string(p) + " on " + n.name + " (rule " +
                                        std::to_string(r.id) + ")");
    }
}

TraceSummary Network::run(Time duration)
{
    if (ran_)
        throw Error("network already ran");
    if (duration <= Time{})
        throw TopologyError("duration must be positive");
    validate();
    ran_ = true;
    for (auto& [id, f] : flows_)
        f->start(*this);
    sched_.run_until(duration);

    TraceSummary s;
    s.duration = duration;
    s.events = sched_.processed();
    for (auto& [id, f] : flows_) {
        f->finish(duration);
        s.flows.push_back(f->stats());
    }
    // Arrival events still pending are packets on the wire.
    std::uint64_t on_wire = 0;
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        const Channel& c = channels_[i];
        const std::uint64_t queued = c.queue.size() + (c.busy ? 1 : 0);
        if (c.c.in_flight < queued)
            throw InvariantViolation("channel " + c.name + " counts fewer packets in flight than queued");
        on_wire += c.c.in_flight - queued;
        if (c.c.offered != c.c.delivered + c.c.queue_dropped + c.c.loss_dropped + c.c.in_flight)
            throw InvariantViolation("packet conservation failed on " + c.name);
        s.channels.push_back({c.name, c.from, c.to, c.c});
    }
    if (on_wire > sched_.pending())
        throw InvariantViolation("more packets on the wire than pending events");
    for (const auto& n : nodes_) {
        if (!n.sw)
            continue;
        for (const auto& r : n.sw->table().rules())
            s.rules.push_back({n.sw->id(), r.id, r.priority, r.counters.packets, r.counters.bytes});
        s.dpt_leaks += n.sw->dpt_leaks();
    }
    s.drops = drops_;
    s.messages = ledger_;
    return s;
}

void build_topology(Network& net, const TopologySpec& topo)
{
    for (const auto& n : topo.nodes) {
        if (net.find(n.name))
            throw TopologyError("duplicate node " + n.name);
        if (n.is_switch)
            net.add_switch(n.name, ClockModel{n.clock_offset, n.drift_ppm, 0});
        else
            net.add_host(n.name);
    }
    for (const auto& l : topo.links) {
        auto a = net.find(l.a), b = net.find(l.b);
        if (!a || !b)
            throw TopologyError("link " + l.a + " - " + l.b + " references an undefined node");
        LinkSpec s = l.spec;
        s.a = *a;
        s.b = *b;
        net.add_link(s);
    }
}

// ---- summary CSV ----

std::string TraceSummary::flows_csv() const
{
    std::ostringstream os;
    os << "flow,kind,src,dst,sent_packets,sent_bytes,delivered_packets,delivered_bytes,retransmits,timeouts,goodput_bps\n";
    for (const auto& f : flows)
        os << f.id << ',' << f.kind << ',' << f.src << ',' << f.dst << ',' << f.sent_packets << ',' << f.sent_bytes
           << ',' << f.delivered_packets << ',' << f.delivered_bytes << ',' << f.retransmits << ',' << f.timeouts << ','
           << fmt_double(f.goodput_bps) << '\n';
    return os.str();
}

std::string TraceSummary::links_csv() const
{
    std::ostringstream os;
    os << "channel,from,to,offered,delivered,queue_dropped,loss_dropped,in_flight,bytes_delivered\n";
    for (const auto& c : channels)
        os << c.name << ',' << c.from << ',' << c.to << ',' << c.c.offered << ',' << c.c.delivered << ','
           << c.c.queue_dropped << ',' << c.c.loss_dropped << ',' << c.c.in_flight << ',' << c.c.bytes_delivered
           << '\n';
    return os.str();
}

std::string TraceSummary::rules_csv() const
{
    std::ostringstream os;
    os << "switch,rule,priority,packets,bytes\n";
    for (const auto& r : rules)
        os << r.node << ',' << r.rule << ',' << r.priority << ',' << r.packets << ',' << r.bytes << '\n';
    return os.str();
}

std::string TraceSummary::drops_csv() const
{
    std::ostringstream os;
    os << "time,packet,flow,kind,channel,node,reason,dpt,color,color_block\n";
    for (const auto& d : drops)
        os << d.time.str() << ',' << d.packet << ',' << d.flow << ',' << (d.kind == PacketKind::Ack ? "ack" : "data")
           << ',' << d.channel << ',' << d.node << ',' << to_string(d.reason) << ','
           << (d.dpt ? std::to_string(d.dpt->raw()) : std::string{}) << ','
           << (d.color ? std::to_string(*d.color) : std::string{}) << ',' << d.color_block << '\n';
    return os.str();
}

std::string TraceSummary::fingerprint() const
{
    return "events " + std::to_string(events) + "\n" + flows_csv() + links_csv() + rules_csv() + drops_csv() +
        messages.to_csv();
}

}  // namespace dptnet
