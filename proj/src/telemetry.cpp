#include "dptnet/telemetry.hpp"

#include "dptnet/error.hpp"
#include "dptnet/trange.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <sstream>

namespace dptnet {

int telemetry_color_of(NtpTimestamp ts)
{
    return bit_of(ts, BitIndex::sec(1));
}

std::int64_t compute_loss(std::uint64_t cs_before, std::uint64_t cs_after, std::uint64_t cr_before,
                          std::uint64_t cr_after)
{
    if (cs_after < cs_before || cr_after < cr_before)
        throw InvariantViolation("counter went backwards between snapshots");
    const auto sent = static_cast<std::int64_t>(cs_after - cs_before);
    const auto received = static_cast<std::int64_t>(cr_after - cr_before);
    if (received > sent)
        throw InvariantViolation("misaligned counter snapshots: received " + std::to_string(received) +
                                 " > sent " + std::to_string(sent));
    return sent - received;
}

OneWayDelay compute_one_way_delay(NtpTimestamp t1, NtpTimestamp t2)
{
    const Time d = t2 - t1;
    return {d, d < Time{}};
}

Time compute_two_way_delay(NtpTimestamp t1, NtpTimestamp t2, NtpTimestamp t3, NtpTimestamp t4)
{
    return (t4 - t1) - (t3 - t2);
}

std::optional<Time> two_way_sample(const TsReading& fwd_s1, const TsReading& fwd_s2, const TsReading& rev_s2,
                                   const TsReading& rev_s1)
{
    if (!fwd_s1.valid || !fwd_s2.valid || !rev_s2.valid || !rev_s1.valid)
        return std::nullopt;
    if (fwd_s1.dpth != fwd_s2.dpth || rev_s2.dpth != rev_s1.dpth)
        return std::nullopt;
    return compute_two_way_delay(fwd_s1.local, fwd_s2.local, rev_s2.local, rev_s1.local);
}

const char* to_string(TelemetryMethod m)
{
    return m == TelemetryMethod::Color ? "color" : "dpt";
}

bool TelemetryResult::exact() const
{
    return std::all_of(blocks.begin(), blocks.end(),
                       [](const BlockReport& b) { return b.loss >= 0 && static_cast<std::uint64_t>(b.loss) == b.truth; });
}

std::string TelemetryResult::csv() const
{
    std::ostringstream os;
    os << "method,pair,block,loss,truth,one_way_delay,two_way_delay\n";
    for (const auto& b : blocks)
        os << to_string(method) << ',' << b.pair << ',' << b.block << ',' << b.loss << ',' << b.truth << ','
           << (b.one_way ? b.one_way->str() : "") << ',' << (b.two_way ? b.two_way->str() : "") << '\n';
    return os.str();
}

namespace {

// Earliest true time at which the clock shows at least `reading`.
Time true_time_of(const ClockModel& c, std::uint64_t reading)
{
    std::int64_t lo = 0;
    std::int64_t hi = static_cast<std::int64_t>(reading) + std::abs(c.offset.ticks()) + 1;
    while (now(c, Time::from_ticks(hi)).raw() < reading)
        hi *= 2;
    while (lo < hi) {
        const auto mid = lo + (hi - lo) / 2;
        if (now(c, Time::from_ticks(mid)).raw() >= reading)
            hi = mid;
        else
            lo = mid + 1;
    }
    return Time::from_ticks(lo);
}

RuleCounters counters_of(const Switch& s, std::uint64_t rule)
{
    for (const auto& r : s.table().rules())
        if (r.id == rule)
            return r.counters;
    throw PipelineError("rule " + std::to_string(rule) + " missing on " + s.name());
}

TsReading read_reg(Switch& s, RegisterId id)
{
    const auto& r = s.reg(id);
    return {r.last_dpth, r.local_time, r.valid};
}

struct Snapshot {
    std::uint64_t block = 0;
    std::array<std::uint64_t, 2> cs{}, cr{};
    std::array<TsReading, 4> s1{}, s2{};
};

struct Pair {
    NodeId h1 = 0, s1 = 0, s2 = 0, h2 = 0;
    std::size_t core_channel = 0;
    std::uint32_t flow = 0;
    std::array<std::uint64_t, 2> send_rule{}, recv_rule{};
    std::vector<Snapshot> snaps;
    std::map<std::uint64_t, std::uint64_t> color_blocks;  // switch colour block -> block index
};

FlowRule make_rule(int prio, PortId in_port, Action a)
{
    FlowRule r;
    r.priority = prio;
    r.key.in_port = in_port;
    r.action = std::move(a);
    return r;
}

constexpr RegisterId kFwd = 0;  // registers 0,1 forward by colour, 2,3 reverse
constexpr RegisterId kRev = 2;

}  // namespace

TelemetryResult run_telemetry(const TelemetryConfig& cfg, TelemetryMethod method, std::uint64_t seed)
{
    if (cfg.pairs < 1 || cfg.intervals < 3)
        throw Error("telemetry needs at least one pair and three intervals");
    if (!(cfg.read_phase > 0 && cfg.read_phase < 1))
        throw Error("read_phase must lie strictly inside a block");

    const bool dpt = method == TelemetryMethod::Dpt;
    const bool delay = dpt && cfg.measure_delay;
    const int pos = cfg.block_bit.position();
    const Time block = toggle_half_period(cfg.block_bit);

    Network net(seed);
    net.set_control_delay(cfg.control_delay);
    const ClockModel s1_clock{cfg.base_offset + cfg.sender_offset, 0, 0};
    const ClockModel s2_clock{cfg.base_offset + cfg.receiver_offset, 0, 0};

    // First measured block starts at least one block into the run, leaving
    // room for the flow to start inside the block before it.
    const std::uint64_t k0 = (now(s1_clock, block * 2).raw() >> pos) + 1;
    auto block_start = [&](std::uint64_t k) { return true_time_of(s1_clock, k << pos); };
    auto read_time = [&](std::uint64_t k) {
        const auto phase = static_cast<std::int64_t>(cfg.read_phase * static_cast<double>(block.ticks()));
        return true_time_of(s1_clock, (k << pos) + static_cast<std::uint64_t>(phase));
    };

    std::vector<Pair> pairs(static_cast<std::size_t>(cfg.pairs));
    for (int i = 0; i < cfg.pairs; ++i) {
        Pair& p = pairs[static_cast<std::size_t>(i)];
        const auto tag = std::to_string(i);
        p.h1 = net.add_host("h1_" + tag);
        p.s1 = net.add_switch("S1_" + tag, s1_clock);
        p.s2 = net.add_switch("S2_" + tag, s2_clock);
        p.h2 = net.add_host("h2_" + tag);
        LinkSpec access;
        access.rate_bps = cfg.access_rate;
        access.delay = cfg.link_delay;
        access.queue_cap = 1000;
        access.a = p.h1;
        access.b = p.s1;
        net.add_link(access);
        LinkSpec core;
        core.a = p.s1;
        core.b = p.s2;
        core.rate_bps = cfg.core_rate;
        core.delay = cfg.link_delay;
        core.queue_cap = cfg.queue_cap;
        core.loss = cfg.loss;
        net.add_link(core);
        access.a = p.s2;
        access.b = p.h2;
        net.add_link(access);
        p.core_channel = net.channel_between(p.s1, p.s2);

        Switch& s1 = net.sw(p.s1);
        Switch& s2 = net.sw(p.s2);
        const PortId s1_host = net.port_towards(p.s1, p.h1), s1_core = net.port_towards(p.s1, p.s2);
        const PortId s2_host = net.port_towards(p.s2, p.h2), s2_core = net.port_towards(p.s2, p.s1);
        for (Switch* s : {&s1, &s2}) {
            s->table().install(make_rule(0, {}, Action::drop()));
            for (RegisterId r = 0; r < 4; ++r)
                s->add_register(r, cfg.block_bit);
        }
        for (std::uint8_t c = 0; c < 2; ++c) {
            FlowRule send = make_rule(10, s1_host, Action::forward(s1_core));
            FlowRule recv = make_rule(10, s2_core, Action::pop_and_forward(s2_host));
            if (dpt) {
                // One slot of the block bit: colour c.
                const auto ts = compile_periodic(PeriodicRange{1, cfg.block_bit, {c}});
                send.ts_match = recv.ts_match = ts.at(0);
            } else {
                send.color_match = recv.color_match = c;
            }
            if (delay) {
                send.action = send.action.with_record(kFwd + c);
                recv.action = recv.action.with_record(kFwd + c);
            }
            p.send_rule[c] = s1.table().install(send);
            p.recv_rule[c] = s2.table().install(recv);

            // Reverse direction, stamped by S2 and popped at S1.
            FlowRule back_out = make_rule(10, s2_host, Action::forward(s2_core));
            FlowRule back_in = make_rule(10, s1_core, Action::pop_and_forward(s1_host));
            if (delay) {
                const auto ts = compile_periodic(PeriodicRange{1, cfg.block_bit, {c}});
                back_out.ts_match = back_in.ts_match = ts.at(0);
                back_out.action = back_out.action.with_record(kRev + c);
                back_in.action = back_in.action.with_record(kRev + c);
            } else if (c == 1) {
                continue;
            }
            s2.table().install(back_out);
            s1.table().install(back_in);
        }
        if (!dpt) {
            s1.set_color_policy(static_cast<std::uint8_t>((k0 - 1) & 1));
            p.color_blocks[s1.color_block()] = k0 - 1;
        }

        // Odd tick offset keeps packet arrivals off block boundaries.
        const Time start = block_start(k0) - block / 2 + Time::from_ticks(12'345 + 2 * i);
        p.flow = static_cast<std::uint32_t>(2 * i + 1);
        CbrSpec f;
        f.id = p.flow;
        f.src = p.h1;
        f.dst = p.h2;
        f.rate_bps = cfg.flow_rate;
        f.size = cfg.packet_size;
        f.start = start;
        net.add_cbr(f);
        if (delay) {
            CbrSpec r = f;
            r.id = p.flow + 1;
            r.src = p.h2;
            r.dst = p.h1;
            r.rate_bps = cfg.reverse_rate;
            r.start = start + Time::from_ticks(777);
            net.add_cbr(r);
        }
    }

    const std::string app = "telemetry";
    for (int j = 0; j < cfg.intervals; ++j) {
        const std::uint64_t k = k0 + static_cast<std::uint64_t>(j);
        if (!dpt) {
            // Toggle lands exactly on the block boundary at S1.
            net.at(block_start(k) - cfg.control_delay, [&net, &pairs, k, app](Time) {
                for (auto& p : pairs)
                    net.send_control(MessageKind::SetTagPolicy, p.s1, app, [&p, k](Switch& s, Time) {
                        s.set_color_policy(static_cast<std::uint8_t>(k & 1));
                        p.color_blocks[s.color_block()] = k;
                    });
            });
        }
        net.at(read_time(k) - cfg.control_delay, [&net, &pairs, k, app, delay](Time) {
            for (auto& p : pairs) {
                p.snaps.push_back(Snapshot{});
                const auto idx = p.snaps.size() - 1;
                p.snaps[idx].block = k;
                net.send_control(MessageKind::ReadCounters, p.s1, app, [&p, idx](Switch& s, Time) {
                    for (int c = 0; c < 2; ++c)
                        p.snaps[idx].cs[c] = counters_of(s, p.send_rule[c]).packets;
                });
                net.send_control(MessageKind::ReadCounters, p.s2, app, [&p, idx](Switch& s, Time) {
                    for (int c = 0; c < 2; ++c)
                        p.snaps[idx].cr[c] = counters_of(s, p.recv_rule[c]).packets;
                });
                if (delay) {
                    net.send_control(MessageKind::ReadTsRegister, p.s1, app, [&p, idx](Switch& s, Time) {
                        for (RegisterId r = 0; r < 4; ++r)
                            p.snaps[idx].s1[r] = read_reg(s, r);
                    });
                    net.send_control(MessageKind::ReadTsRegister, p.s2, app, [&p, idx](Switch& s, Time) {
                        for (RegisterId r = 0; r < 4; ++r)
                            p.snaps[idx].s2[r] = read_reg(s, r);
                    });
                }
            }
        });
    }

    const Time end = read_time(k0 + static_cast<std::uint64_t>(cfg.intervals) - 1) + Time::from_ticks(1);
    TelemetryResult res;
    res.method = method;
    res.trace = net.run(end);
    res.messages = res.trace.messages.count(app);

    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Pair& p = pairs[i];
        std::map<std::uint64_t, std::uint64_t> truth;
        for (const auto& d : res.trace.drops) {
            if (d.flow != p.flow || d.kind != PacketKind::Data || d.channel != static_cast<std::int64_t>(p.core_channel))
                continue;
            if (dpt && d.dpt)
                ++truth[d.dpt->raw() >> pos];
            else if (!dpt && d.color)
                if (auto it = p.color_blocks.find(d.color_block); it != p.color_blocks.end())
                    ++truth[it->second];
        }
        for (const auto& f : res.trace.flows)
            if (f.id == p.flow)
                res.data_packets += f.sent_packets;

        for (std::size_t j = 1; j + 1 < p.snaps.size(); ++j) {
            const Snapshot& before = p.snaps[j - 1];
            const Snapshot& after = p.snaps[j + 1];
            BlockReport b;
            b.pair = static_cast<int>(i);
            b.block = p.snaps[j].block;
            const int c = static_cast<int>(b.block & 1);
            b.loss = compute_loss(before.cs[c], after.cs[c], before.cr[c], after.cr[c]);
            b.truth = truth.count(b.block) ? truth.at(b.block) : 0;
            if (delay) {
                const auto& f1 = after.s1[kFwd + c];
                const auto& f2 = after.s2[kFwd + c];
                if (f1.valid && f2.valid && f1.dpth == f2.dpth && (f1.dpth.raw() >> pos) == b.block)
                    b.one_way = compute_one_way_delay(f1.local, f2.local).delay;
                b.two_way = two_way_sample(f1, f2, after.s2[kRev + c], after.s1[kRev + c]);
                if (!b.two_way)
                    ++res.rejected_samples;
            }
            res.blocks.push_back(b);
        }
    }
    return res;
}

}  // namespace dptnet
