#include "dptnet/loadbalance.hpp"

#include "dptnet/error.hpp"
#include "dptnet/trange.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <deque>
#include <limits>
#include <sstream>

namespace dptnet {

ToggleInterval compute_toggle_interval(std::uint64_t total_path_rate_bps, std::uint32_t mtu)
{
    if (total_path_rate_bps == 0 || mtu == 0)
        throw RangeError("toggle interval needs a positive rate and mtu");
    const unsigned __int128 bits = static_cast<unsigned __int128>(mtu) * 8;
    const auto ipt = static_cast<std::uint64_t>((bits << 32) / total_path_rate_bps);
    if (ipt == 0)
        throw RangeError("inter-packet time below one tick");
    const int p = std::bit_width(ipt) - 1;  // largest 2^p <= ipt
    const auto bit = BitIndex::from_position(std::min(p, 63));
    return {bit, toggle_half_period(bit), Time::from_ticks(static_cast<std::int64_t>(ipt))};
}

const char* to_string(BalanceMode m)
{
    switch (m) {
    case BalanceMode::Dpt:
        return "dpt";
    case BalanceMode::Rps:
        return "rps";
    case BalanceMode::Ecmp:
        return "ecmp";
    }
    return "?";
}

std::vector<std::uint32_t> BalancePolicy::slots_of(std::size_t path) const
{
    std::vector<std::uint32_t> out;
    for (std::size_t s = 0; s < slot_table.size(); ++s)
        if (slot_table[s] == path)
            out.push_back(static_cast<std::uint32_t>(s));
    return out;
}

BalancePolicy make_dpt_policy(std::vector<std::uint32_t> weights, BitIndex slot_lsb)
{
    if (weights.empty())
        throw RangeError("balance policy needs at least one path");
    std::uint64_t total = 0;
    for (auto w : weights)
        total += w;
    if (total == 0 || !std::has_single_bit(total))
        throw RangeError("path weights must sum to a power of two");
    if (total == 1) {
        // A single slot cannot be expressed; two slots, same owner.
        for (auto& w : weights)
            w *= 2;
        total = 2;
    }
    const int slot_bits = std::countr_zero(total);
    if (slot_bits > kMaxSlotBits || slot_lsb.position() + slot_bits > 64)
        throw RangeError("too many slots for bit " + slot_lsb.str());

    BalancePolicy p;
    p.mode = BalanceMode::Dpt;
    p.weights = weights;
    p.slot_lsb = slot_lsb;
    p.slot_bits = slot_bits;
    // Smooth weighted round robin spreads each path's slots evenly.
    std::vector<std::int64_t> credit(weights.size(), 0);
    for (std::uint64_t s = 0; s < total; ++s) {
        std::size_t best = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            credit[i] += weights[i];
            if (credit[i] > credit[best])
                best = i;
        }
        credit[best] -= static_cast<std::int64_t>(total);
        p.slot_table.push_back(best);
    }
    return p;
}

namespace {

BalancePolicy uniform(BalanceMode mode, std::size_t paths)
{
    if (paths == 0)
        throw RangeError("balance policy needs at least one path");
    BalancePolicy p;
    p.mode = mode;
    p.weights.assign(paths, 1);
    p.slot_bits = 0;
    return p;
}

}  // namespace

BalancePolicy make_rps_policy(std::size_t paths)
{
    return uniform(BalanceMode::Rps, paths);
}

BalancePolicy make_ecmp_policy(std::size_t paths)
{
    return uniform(BalanceMode::Ecmp, paths);
}

std::size_t balance(const BalancePolicy& policy, const Packet& pkt, Rng& rng)
{
    switch (policy.mode) {
    case BalanceMode::Dpt: {
        if (!pkt.dpt)
            return static_cast<std::size_t>(pkt.key.hash() % policy.paths());
        const std::uint64_t mask = (std::uint64_t{1} << policy.slot_bits) - 1;
        return policy.slot_table[(pkt.dpt->raw() >> policy.slot_lsb.position()) & mask];
    }
    case BalanceMode::Rps:
        return static_cast<std::size_t>(rng.below(policy.paths()));
    case BalanceMode::Ecmp:
        return static_cast<std::size_t>(pkt.key.hash() % policy.paths());
    }
    return 0;
}

std::vector<FlowRule> balance_rules(const BalancePolicy& policy, const std::vector<PortId>& ports,
                                    const FlowRule& base)
{
    if (ports.size() != policy.paths())
        throw PipelineError("balance policy has " + std::to_string(policy.paths()) + " paths but " +
                            std::to_string(ports.size()) + " ports were given");
    std::vector<FlowRule> out;
    auto add = [&](Action a, int prio, std::optional<TernaryPattern> ts) {
        FlowRule r = base;
        r.priority = prio;
        r.action = std::move(a);
        r.ts_match = std::move(ts);
        out.push_back(std::move(r));
    };
    switch (policy.mode) {
    case BalanceMode::Dpt:
        for (std::size_t i = 0; i < ports.size(); ++i) {
            auto slots = policy.slots_of(i);
            if (slots.empty())
                continue;
            PeriodicRange range{policy.slot_bits, policy.slot_lsb, {slots.begin(), slots.end()}};
            for (auto& pat : compile_periodic(range, true))
                add(Action::forward(ports[i]), base.priority, pat);
        }
        add(Action::hash(ports), base.priority - 1, std::nullopt);
        break;
    case BalanceMode::Rps:
        add(Action::spray(ports), base.priority, std::nullopt);
        break;
    case BalanceMode::Ecmp:
        add(Action::hash(ports), base.priority, std::nullopt);
        break;
    }
    return out;
}

TopologySpec two_path_topology()
{
    TopologySpec t;
    t.nodes = {{"src", false, {}, 0}, {"S1", true, {}, 0}, {"S2", true, {}, 0},
               {"S3", true, {}, 0},   {"dst", false, {}, 0}};
    auto link = [&](std::string a, std::string b, std::uint64_t rate, Time jitter, std::uint32_t queue) {
        LinkSpec s;
        s.rate_bps = rate;
        s.delay = Time::milliseconds(1);
        s.queue_cap = queue;
        s.jitter = jitter;
        t.links.push_back({std::move(a), std::move(b), s});
    };
    // Short queues on the split so that path imbalance and reordering cost
    // goodput; with 32 packets per path the buffer exceeds the pipe and hides it.
    link("src", "S1", 25'000'000, Time::microseconds(100), kDefaultQueueCap);
    link("S1", "S2", 25'000'000, {}, kDefaultQueueCap);
    link("S2", "S3", 10'000'000, {}, 8);
    link("S2", "S3", 10'000'000, {}, 8);
    link("S3", "dst", 25'000'000, {}, kDefaultQueueCap);
    return t;
}

namespace {

struct Hop {
    PortId port;
    NodeId peer;
    std::size_t link;
};

std::vector<std::vector<Hop>> adjacency(const Network& net)
{
    std::vector<std::vector<Hop>> adj(net.node_count());
    for (std::size_t i = 0; i < net.link_count(); ++i) {
        const auto& l = net.link(i);
        adj[l.a].push_back({*l.a_port, l.b, i});
        adj[l.b].push_back({*l.b_port, l.a, i});
    }
    for (auto& v : adj)
        std::sort(v.begin(), v.end(), [](const Hop& x, const Hop& y) { return x.port < y.port; });
    return adj;
}

// Hop counts to `target`; hosts other than the target do not forward.
std::vector<int> distances(const Network& net, const std::vector<std::vector<Hop>>& adj, NodeId target)
{
    std::vector<int> dist(net.node_count(), std::numeric_limits<int>::max());
    std::deque<NodeId> q{target};
    dist[target] = 0;
    while (!q.empty()) {
        const NodeId u = q.front();
        q.pop_front();
        for (const auto& h : adj[u]) {
            if (dist[h.peer] != std::numeric_limits<int>::max())
                continue;
            dist[h.peer] = dist[u] + 1;
            if (net.is_switch(h.peer))
                q.push_back(h.peer);
        }
    }
    return dist;
}

std::uint64_t cookie_for(NodeId target)
{
    return 0xba1a0000ULL | target;
}

}  // namespace

BalanceResult run_balance(const TopologySpec& topo, const BalanceSetup& setup, BalanceMode mode, std::uint64_t seed)
{
    if (setup.flows < 1)
        throw RangeError("load balancing needs at least one flow");
    if (setup.duration <= Time{})
        throw RangeError("duration must be positive");

    Network net(seed);
    build_topology(net, topo);
    auto lookup = [&](const std::string& n) {
        auto id = net.find(n);
        if (!id)
            throw TopologyError("load balancing refers to undefined node " + n);
        return *id;
    };
    const NodeId src = lookup(setup.src), dst = lookup(setup.dst), lb = lookup(setup.balancer);
    if (net.is_switch(src) || net.is_switch(dst))
        throw TopologyError("load balancing endpoints must be hosts");
    if (!net.is_switch(lb))
        throw TopologyError(setup.balancer + " is not a switch");

    const auto adj = adjacency(net);
    BalanceResult res;
    res.mode = mode;
    std::vector<std::size_t> path_channels;

    {
        const auto to_dst = distances(net, adj, dst), to_src = distances(net, adj, src);
        if (to_dst[src] == std::numeric_limits<int>::max())
            throw TopologyError("no path between " + setup.src + " and " + setup.dst);
        if (to_dst[lb] == std::numeric_limits<int>::max() || to_dst[lb] + to_src[lb] != to_dst[src])
            throw TopologyError("balancer " + setup.balancer + " is not on a shortest path from " + setup.src +
                                " to " + setup.dst);
    }
    for (NodeId target : {dst, src}) {
        const auto dist = distances(net, adj, target);
        for (NodeId s : net.switches()) {
            if (dist[s] == std::numeric_limits<int>::max())
                continue;
            std::vector<Hop> next;
            for (const auto& h : adj[s])
                if (dist[h.peer] == dist[s] - 1)
                    next.push_back(h);
            if (next.empty())
                continue;
            FlowRule base;
            base.cookie = cookie_for(target);
            base.priority = 10;
            base.key.dst = target;
            if (next.front().peer == target) {
                base.action = Action::pop_and_forward(next.front().port);
                net.sw(s).table().install(base);
                continue;
            }
            if (s != lb || target != dst) {
                base.action = Action::forward(next.front().port);
                net.sw(s).table().install(base);
                continue;
            }
            std::vector<PortId> ports;
            std::uint64_t rate = 0;
            for (const auto& h : next) {
                ports.push_back(h.port);
                rate += net.link(h.link).rate_bps;
                path_channels.push_back(net.channel_at(s, h.port));
            }
            res.path_rate_bps = rate;
            BalancePolicy policy;
            if (mode == BalanceMode::Dpt) {
                const auto ti = compute_toggle_interval(rate, setup.mtu);
                res.bit = setup.bit.value_or(ti.bit);
                res.half_period = toggle_half_period(res.bit);
                auto w = setup.weights;
                if (w.empty())
                    w.assign(ports.size(), 1);
                if (w.size() != ports.size())
                    throw RangeError("balancer " + setup.balancer + " has " + std::to_string(ports.size()) +
                                     " paths but " + std::to_string(w.size()) + " weights were given");
                policy = make_dpt_policy(w, res.bit);
            } else {
                policy = mode == BalanceMode::Rps ? make_rps_policy(ports.size()) : make_ecmp_policy(ports.size());
            }
            for (auto& r : balance_rules(policy, ports, base))
                net.sw(s).table().install(std::move(r));
        }
    }
    for (int f = 0; f < setup.flows; ++f) {
        AimdSpec a;
        a.id = static_cast<std::uint32_t>(f + 1);
        a.src = src;
        a.dst = dst;
        a.mtu = setup.mtu;
        a.min_rto = setup.min_rto;
        net.add_aimd(a);
    }
    net.validate();
    res.trace = net.run(setup.duration);
    for (const auto& fs : res.trace.flows) {
        res.goodput_bps += fs.goodput_bps;
        res.retransmits += fs.retransmits;
        res.timeouts += fs.timeouts;
    }
    for (auto ch : path_channels)
        res.path_packets.push_back(net.channel_counters(ch).delivered);
    return res;
}

std::string balance_csv_header()
{
    return "mode,bit,half_period_us,goodput_bps,utilisation,retransmits,timeouts,path_packets";
}

std::string balance_csv_row(const BalanceResult& r)
{
    std::ostringstream os;
    os << to_string(r.mode) << ',' << (r.mode == BalanceMode::Dpt ? r.bit.str() : std::string("-")) << ',';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", r.half_period.to_seconds() * 1e6);
    os << (r.mode == BalanceMode::Dpt ? buf : "-") << ',';
    std::snprintf(buf, sizeof buf, "%.0f", r.goodput_bps);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.4f", r.path_rate_bps ? r.goodput_bps / static_cast<double>(r.path_rate_bps) : 0.0);
    os << buf << ',' << r.retransmits << ',' << r.timeouts << ',';
    for (std::size_t i = 0; i < r.path_packets.size(); ++i)
        os << (i ? ";" : "") << r.path_packets[i];
    return os.str();
}

}  // namespace dptnet
