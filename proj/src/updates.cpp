#include "dptnet/updates.hpp"

#include "dptnet/error.hpp"
#include "dptnet/trange.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace dptnet {

const char* to_string(UpdateMethod m)
{
    switch (m) {
    case UpdateMethod::TwoPhase:
        return "two_phase";
    case UpdateMethod::OnePhase:
        return "one_phase";
    case UpdateMethod::Periodic:
        return "periodic";
    }
    return "?";
}

int ingress_count(int switches)
{
    return (2 * switches + 2) / 3;
}

std::string UpdateResult::audit_csv() const
{
    std::ostringstream os;
    os << "packet_id,epoch_tag,consistent\n";
    for (const auto& a : audit)
        os << a.packet << ',' << (a.epoch ? std::to_string(*a.epoch) : "") << ',' << (a.consistent ? 1 : 0) << '\n';
    return os.str();
}

namespace {

const std::string kApp = "updates";

struct FlowInfo {
    std::uint32_t id = 0;
    NodeId src_host = 0, dst_host = 0;
    std::size_t src_leaf = 0, dst_leaf = 0;
};

struct Fabric {
    std::vector<NodeId> leaves, spines;
    std::vector<FlowInfo> flows;
    int diameter_links = 0;
};

Fabric build_fabric(Network& net, const UpdateConfig& cfg, std::uint64_t seed)
{
    Fabric f;
    const int n = cfg.switches;
    const int leaves = ingress_count(n);
    const int spines = n - leaves;
    Rng clocks = Rng::derive(seed, {0xc10cULL});
    const auto span = static_cast<std::uint64_t>(cfg.max_offset.ticks());
    auto clock = [&] {
        const auto off = static_cast<std::int64_t>(clocks.below(2 * span + 1)) - static_cast<std::int64_t>(span);
        return ClockModel{cfg.base_offset + Time::from_ticks(off), 0, 0};
    };
    for (int i = 0; i < leaves; ++i)
        f.leaves.push_back(net.add_switch("L" + std::to_string(i), clock()));
    for (int j = 0; j < spines; ++j)
        f.spines.push_back(net.add_switch("P" + std::to_string(j), clock()));

    LinkSpec ls;
    ls.rate_bps = cfg.link_rate;
    ls.delay = cfg.link_delay;
    ls.queue_cap = cfg.queue_cap;
    std::vector<NodeId> hosts;
    for (int i = 0; i < leaves; ++i) {
        hosts.push_back(net.add_host("H" + std::to_string(i)));
        ls.a = hosts.back();
        ls.b = f.leaves[static_cast<std::size_t>(i)];
        net.add_link(ls);
    }
    if (leaves == 1) {  // a lone switch gets a second host to talk to
        hosts.push_back(net.add_host("H1"));
        ls.a = hosts.back();
        ls.b = f.leaves[0];
        net.add_link(ls);
    }
    if (spines > 0) {
        for (auto l : f.leaves)
            for (auto s : f.spines) {
                ls.a = l;
                ls.b = s;
                net.add_link(ls);
            }
        f.diameter_links = 4;
    } else {
        for (std::size_t a = 0; a < f.leaves.size(); ++a)
            for (std::size_t b = a + 1; b < f.leaves.size(); ++b) {
                ls.a = f.leaves[a];
                ls.b = f.leaves[b];
                net.add_link(ls);
            }
        f.diameter_links = leaves > 1 ? 3 : 2;
    }

    for (int i = 0; i < leaves; ++i) {
        FlowInfo fl;
        fl.id = static_cast<std::uint32_t>(i + 1);
        fl.src_leaf = static_cast<std::size_t>(i);
        fl.dst_leaf = leaves == 1 ? 0 : static_cast<std::size_t>((i + 1) % leaves);
        fl.src_host = hosts[static_cast<std::size_t>(i)];
        fl.dst_host = leaves == 1 ? hosts[1] : hosts[fl.dst_leaf];
        f.flows.push_back(fl);
    }
    return f;
}

std::vector<NodeId> path_of(const Fabric& f, const FlowInfo& fl, int round, int shift)
{
    std::vector<NodeId> p{f.leaves[fl.src_leaf]};
    if (fl.src_leaf == fl.dst_leaf)
        return p;
    if (!f.spines.empty()) {
        const auto k = (fl.src_leaf + static_cast<std::size_t>(round * shift)) % f.spines.size();
        p.push_back(f.spines[k]);
    }
    p.push_back(f.leaves[fl.dst_leaf]);
    return p;
}

using Batches = std::map<NodeId, std::vector<FlowRule>>;

// Appends one copy of `proto` per hop of the path, with the forwarding action filled in.
void add_path_rules(const Network& net, const FlowInfo& fl, const std::vector<NodeId>& path, const FlowRule& proto,
                    Batches& out)
{
    for (std::size_t h = 0; h < path.size(); ++h) {
        FlowRule r = proto;
        r.key.src = fl.src_host;
        r.key.dst = fl.dst_host;
        r.key.kind = PacketKind::Data;
        r.action = h + 1 == path.size() ? Action::pop_and_forward(net.port_towards(path[h], fl.dst_host))
                                        : Action::forward(net.port_towards(path[h], path[h + 1]));
        out[path[h]].push_back(std::move(r));
    }
}

std::uint64_t flow_cookie(std::uint64_t epoch, std::uint32_t flow)
{
    return (epoch << 20) | flow;
}

std::size_t total_rules(const Network& net)
{
    std::size_t n = 0;
    for (auto s : net.switches())
        n += net.sw(s).table().size();
    return n;
}

}  // namespace

UpdateResult run_update(const UpdateConfig& cfg, UpdateMethod method, std::uint64_t seed)
{
    if (cfg.switches < 1 || cfg.rounds < 1)
        throw PlanError("update needs at least one switch and one round");
    if (cfg.max_offset < Time{})
        throw PlanError("max_offset must be non-negative");

    Network net(seed);
    net.set_control_delay(cfg.control_delay);
    Fabric fab = build_fabric(net, cfg, seed);
    const Time ser = Time::from_ticks(
        static_cast<std::int64_t>(((static_cast<__int128>(cfg.packet_size) + kDefaultDptBytes) * 8 << 32) / cfg.link_rate));
    const Time drain = cfg.drain.value_or((cfg.link_delay + ser) * (2 * fab.diameter_links));
    const Time d = cfg.control_delay;
    const Time P = method == UpdateMethod::Periodic ? toggle_half_period(cfg.round_bit) : cfg.round_period;

    switch (method) {
    case UpdateMethod::TwoPhase:
        if (d * 4 + drain >= P)
            throw PlanError("round period too short for install, tag switch and drain");
        break;
    case UpdateMethod::OnePhase:
        if (cfg.margin < cfg.max_offset + d)
            throw PlanError("T_thr margin " + cfg.margin.str() + " s is below max clock offset + control delay");
        if (cfg.margin + cfg.max_offset + drain + d >= P)
            throw PlanError("round period too short for margin and drain");
        break;
    case UpdateMethod::Periodic:
        if (P / 4 < cfg.max_offset + drain)
            throw PlanError("a quarter round cannot cover clock offset plus drain");
        break;
    }

    UpdateResult res;
    res.method = method;
    res.switches = cfg.switches;
    res.ingress = static_cast<int>(fab.leaves.size());

    // Epoch 0 is provisioned before the run.
    std::vector<std::vector<NodeId>> cur_path;
    std::vector<std::uint64_t> cur_epoch(fab.flows.size(), 0);
    {
        Batches b;
        for (const auto& fl : fab.flows) {
            cur_path.push_back(path_of(fab, fl, 0, cfg.path_shift));
            FlowRule r;
            r.priority = 10;
            r.epoch_tag = 0;
            r.cookie = method == UpdateMethod::Periodic ? flow_cookie(0, fl.id) : 0;
            if (method == UpdateMethod::TwoPhase)
                r.tag_match = 0;
            add_path_rules(net, fl, cur_path.back(), r, b);
        }
        for (auto s : net.switches()) {
            Switch& sw = net.sw(s);
            FlowRule def;
            def.priority = 0;
            def.cookie = ~std::uint64_t{0};
            def.action = Action::drop();
            sw.table().install(def);
            for (auto& r : b[s])
                sw.table().install(r);
            sw.set_audit_epochs(true);
        }
        if (method == UpdateMethod::TwoPhase)
            for (auto l : fab.leaves)
                net.sw(l).set_version_policy(0);
    }

    net.on_deliver = [&res](const Packet& p, NodeId, Time) {
        if (p.kind != PacketKind::Data)
            return;
        ++res.audited;
        const bool ok = p.trail.consistent();
        res.violations += ok ? 0 : 1;
        res.audit.push_back({p.id, p.trail.epoch, ok});
    };
    net.on_rule_drop = [&res](const Packet& p, NodeId, const FlowRule&, Time) {
        ++res.audited;
        ++res.violations;
        ++res.black_holes;
        res.audit.push_back({p.id, p.trail.epoch, false});
    };

    const Time warm = Time::milliseconds(500);
    for (std::size_t i = 0; i < fab.flows.size(); ++i) {
        CbrSpec c;
        c.id = fab.flows[i].id;
        c.src = fab.flows[i].src_host;
        c.dst = fab.flows[i].dst_host;
        c.rate_bps = cfg.flow_rate;
        c.size = cfg.packet_size;
        c.start = Time::milliseconds(100) + Time::from_ticks(static_cast<std::int64_t>(9'973 * i));
        net.add_cbr(c);
    }

    auto send_batches = [&net](const Batches& b, std::uint64_t round) {
        for (const auto& [s, rules] : b)
            net.send_control(MessageKind::InstallRule, s, kApp, [rules](Switch& sw, Time) {
                for (const auto& r : rules)
                    sw.table().install(r);
            }, round);
    };
    auto all_switches = net.switches();

    Time end{};
    if (method == UpdateMethod::TwoPhase || method == UpdateMethod::OnePhase) {
        for (int r = 1; r <= cfg.rounds; ++r) {
            const Time t_round = warm + P * (r - 1);
            const auto epoch = static_cast<std::uint64_t>(r);
            net.at(t_round, [&, r, epoch, t_round](Time) {
                Batches b;
                std::uint64_t thr_raw = 0;
                FlowRule proto;
                proto.epoch_tag = epoch;
                proto.cookie = epoch;
                if (method == UpdateMethod::TwoPhase) {
                    proto.priority = 10;
                    proto.tag_match = static_cast<std::uint32_t>(epoch);
                } else {
                    const NtpTimestamp thr = now(ClockModel{cfg.base_offset, 0, 0}, t_round + cfg.margin);
                    thr_raw = thr.raw();
                    for (auto s : all_switches)
                        if (now(net.sw(s).clock(), t_round + d) >= thr)
                            throw PlanError("T_thr " + thr.str() + " already passed at " + net.name(s));
                    proto.priority = 10 + r;
                }
                for (std::size_t i = 0; i < fab.flows.size(); ++i) {
                    const auto p = path_of(fab, fab.flows[i], r, cfg.path_shift);
                    if (method == UpdateMethod::TwoPhase) {
                        add_path_rules(net, fab.flows[i], p, proto, b);
                    } else {
                        for (const auto& pat : compile_extremal({thr_raw}, 64)) {
                            FlowRule rr = proto;
                            rr.ts_match = pat;
                            add_path_rules(net, fab.flows[i], p, rr, b);
                        }
                    }
                }
                for (auto s : all_switches)
                    b[s];  // every switch hears about the new configuration
                send_batches(b, epoch);

                auto remove_old = [&net, &all_switches, epoch](Time) {
                    for (auto s : all_switches)
                        net.send_control(MessageKind::RemoveRule, s, kApp,
                                         [epoch](Switch& sw, Time) { sw.table().remove_cookie(epoch - 1); }, epoch);
                };
                if (method == UpdateMethod::TwoPhase) {
                    net.at(t_round + d * 2, [&net, &fab, epoch, d, drain, remove_old](Time now_t) {
                        for (auto l : fab.leaves)
                            net.send_control(MessageKind::SetTagPolicy, l, kApp, [epoch](Switch& sw, Time) {
                                sw.set_version_policy(static_cast<std::uint32_t>(epoch));
                            }, epoch);
                        net.at(now_t + d + drain, remove_old);
                    });
                } else {
                    net.at(t_round + cfg.margin + cfg.max_offset + drain, remove_old);
                }
            });
        }
        end = warm + P * cfg.rounds;
    } else {
        const std::int64_t pt = P.ticks();
        const std::int64_t m1 = (cfg.base_offset + warm).ticks() / pt + 2;
        for (int r = 1; r <= cfg.rounds; ++r) {
            const auto epoch = static_cast<std::uint64_t>(r);
            const std::int64_t m = m1 + r - 1;
            const Time tau = Time::from_ticks(m * pt) - cfg.base_offset;  // controller clock crosses the boundary
            const auto bit = static_cast<std::uint32_t>(m & 1);
            const auto pattern = compile_periodic(PeriodicRange{1, cfg.round_bit, {bit}}).at(0);

            for (int slot = 1; slot <= 4; ++slot)
                net.at(tau + P * (2 * slot - 5) / 8, [&net, &res, r, slot](Time) {
                    res.rule_samples.push_back({r, slot, total_rules(net)});
                });

            // Slot 2: install the new entries, matching the bit value after the toggle.
            auto changed = std::make_shared<std::vector<std::size_t>>();
            net.at(tau - P / 4, [&, r, epoch, tau, pattern, changed](Time t) {
                for (std::size_t i = 0; i < fab.flows.size(); ++i)
                    if (path_of(fab, fab.flows[i], r, cfg.path_shift) != cur_path[i])
                        changed->push_back(i);
                if (changed->empty())
                    return;
                if (t + d > tau - cfg.max_offset) {
                    res.aborted_rounds.push_back(r);
                    changed->clear();
                    return;
                }
                Batches b;
                for (auto i : *changed) {
                    FlowRule proto;
                    proto.priority = 20;
                    proto.epoch_tag = epoch;
                    proto.cookie = flow_cookie(epoch, fab.flows[i].id);
                    proto.ts_match = pattern;
                    add_path_rules(net, fab.flows[i], path_of(fab, fab.flows[i], r, cfg.path_shift), proto, b);
                }
                send_batches(b, epoch);
            });
            // Slot 4: old entries go; the new ones lose the bit test.
            net.at(tau + P / 4, [&, r, epoch, changed](Time) {
                if (changed->empty())
                    return;
                Batches stable;
                std::map<NodeId, std::vector<std::uint64_t>> drop;
                for (auto i : *changed) {
                    const auto& fl = fab.flows[i];
                    FlowRule proto;
                    proto.priority = 10;
                    proto.epoch_tag = epoch;
                    proto.cookie = flow_cookie(epoch, fl.id);
                    const auto next = path_of(fab, fl, r, cfg.path_shift);
                    add_path_rules(net, fl, next, proto, stable);
                    for (auto s : cur_path[i])
                        drop[s].push_back(flow_cookie(cur_epoch[i], fl.id));
                    for (auto s : next)
                        drop[s].push_back(flow_cookie(epoch, fl.id));
                    cur_path[i] = next;
                    cur_epoch[i] = epoch;
                }
                for (auto& [s, cookies] : drop)
                    net.send_control(MessageKind::RemoveRule, s, kApp,
                                     [cookies, rules = stable[s]](Switch& sw, Time) {
                                         for (auto c : cookies)
                                             sw.table().remove_cookie(c);
                                         for (const auto& rr : rules)
                                             sw.table().install(rr);
                                     }, epoch);
            });
            end = tau + P / 2;
        }
    }

    res.trace = net.run(end);
    res.messages = res.trace.messages.count(kApp);
    res.installs = res.trace.messages.count(kApp, MessageKind::InstallRule);
    res.removes = res.trace.messages.count(kApp, MessageKind::RemoveRule);
    res.tag_updates = res.trace.messages.count(kApp, MessageKind::SetTagPolicy);
    return res;
}

}  // namespace dptnet
