#include <doctest.h>

#include "dptnet/error.hpp"
#include "dptnet/pipeline.hpp"

#include <random>

using namespace dptnet;

namespace {

Packet data_packet(std::uint64_t id, std::uint32_t size = 1500)
{
    Packet p;
    p.id = id;
    p.key = {1, 2, 17, 1000, 2000};
    p.size = size;
    return p;
}

FlowRule rule(int prio, Action a, std::optional<TernaryPattern> ts = std::nullopt)
{
    FlowRule r;
    r.priority = prio;
    r.action = std::move(a);
    r.ts_match = ts;
    return r;
}

FlowRule default_drop()
{
    return rule(0, Action::drop());
}

// T < t0 as one entry per 1-bit of t0: same prefix above it, that bit 0, rest wildcard.
std::vector<TernaryPattern> below(std::uint64_t t0)
{
    std::vector<TernaryPattern> out;
    for (int i = 63; i >= 0; --i) {
        const std::uint64_t bit = 1ULL << i;
        if (!(t0 & bit))
            continue;
        const std::uint64_t mask = ~(bit - 1);
        out.push_back({t0 & mask & ~bit, mask});
    }
    return out;
}

}  // namespace

TEST_CASE("ingress_push stamps the local clock and grows the packet")
{
    auto p = ingress_push(data_packet(1), ClockModel{}, Time::seconds(2.5));
    REQUIRE(p.dpt);
    CHECK(p.dpt->sec == 2);
    CHECK(p.dpt->frac == (1U << 31));
    CHECK(p.size == 1508);

    auto q = ingress_push(data_packet(1), ClockModel{Time::seconds(1.0), 0, 0}, Time::seconds(2.5));
    CHECK(q.dpt->sec == 3);
    CHECK(q.dpt->frac == (1U << 31));

    auto one_bit = ingress_push(data_packet(1), ClockModel{}, Time::seconds(1), 0);
    CHECK(one_bit.size == 1500);

    CHECK_THROWS_AS(ingress_push(p, ClockModel{}, Time::seconds(3)), PipelineError);
}

TEST_CASE("egress_pop restores the original packet")
{
    const auto orig = data_packet(9, 700);
    auto popped = egress_pop(ingress_push(orig, ClockModel{}, Time::seconds(4)));
    CHECK(popped == orig);
    CHECK_THROWS_AS(egress_pop(popped), PipelineError);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        auto p = data_packet(rng(), 64 + static_cast<std::uint32_t>(rng() % 1437));
        p.seq = rng();
        auto pushed = ingress_push(p, ClockModel{Time::from_ticks(static_cast<std::int64_t>(rng() >> 20)), 0, 0},
                                   Time::from_ticks(static_cast<std::int64_t>(rng() >> 2)),
                                   static_cast<std::uint32_t>(rng() % 16));
        REQUIRE(egress_pop(pushed) == p);
    }
}

TEST_CASE("pop after three forwarding hops restores the size")
{
    Switch s1(1, "S1", {}, 1), s2(2, "S2", {}, 1), s3(3, "S3", {}, 1);
    s1.set_edge_port(1);
    s1.table().install(rule(1, Action::forward(2)));
    s2.table().install(rule(1, Action::forward(2)));
    s3.table().install(rule(1, Action::pop_and_forward(2)));
    s3.set_edge_port(2, false);

    auto p = data_packet(3, 1234);
    const auto orig = p;
    CHECK(s1.process(p, 1, Time::seconds(1)).forward);
    CHECK(p.size == 1242);
    s2.process(p, 1, Time::seconds(1.001));
    s3.process(p, 1, Time::seconds(1.002));
    CHECK(p.size == orig.size);
    CHECK(!p.dpt);
    CHECK(s3.dpt_leaks() == 0);
}

TEST_CASE("match selects by priority, ties by lowest id, and counts")
{
    FlowTable t;
    t.install(default_drop());
    const auto color0 = t.install(rule(10, Action::forward(1), TernaryPattern{0, 1ULL << 32}));
    const auto color1 = t.install(rule(10, Action::forward(2), TernaryPattern{1ULL << 32, 1ULL << 32}));

    auto p = ingress_push(data_packet(1), ClockModel{}, Time::seconds(4.2));
    auto& fired = match(p, t);
    CHECK(fired.id == color0);
    CHECK(fired.counters.packets == 1);
    CHECK(fired.counters.bytes == 1508);

    auto p2 = ingress_push(data_packet(2), ClockModel{}, Time::seconds(5.2));
    CHECK(match(p2, t).id == color1);

    // Without a DPTH only rules that do not test the timestamp are candidates.
    auto bare = data_packet(3);
    CHECK(match(bare, t).priority == 0);

    FlowTable ties;
    const auto first = ties.install(rule(5, Action::forward(1)));
    ties.install(rule(5, Action::forward(2)));
    CHECK(match(bare, ties).id == first);

    FlowTable empty;
    CHECK_THROWS_AS(match(bare, empty), PipelineError);
}

TEST_CASE("threshold rule pair agrees with direct comparison")
{
    const NtpTimestamp thr{100, 0x40000000};
    FlowTable t;
    t.install(default_drop());
    for (const auto& p : below(thr.raw())) {
        auto r = rule(1, Action::forward(1), p);
        r.epoch_tag = 0;
        t.install(r);
    }
    for (const auto& p : compile_extremal({thr.raw()}, 64)) {
        auto r = rule(1, Action::forward(2), p);
        r.epoch_tag = 1;
        t.install(r);
    }
    std::mt19937_64 rng(8);
    for (int i = 0; i < 20'000; ++i) {
        const auto ts = NtpTimestamp::from_raw(thr.raw() + (rng() % (1ULL << 34)) - (1ULL << 33));
        auto pkt = data_packet(static_cast<std::uint64_t>(i));
        pkt.dpt = ts;
        const auto& fired = match(pkt, t);
        REQUIRE(fired.epoch_tag == std::optional<std::uint64_t>(ts >= thr ? 1 : 0));
    }
}

TEST_CASE("property: counters conserve offered packets and are deterministic")
{
    auto run = [](std::uint64_t seed) {
        FlowTable t;
        t.install(default_drop());
        std::mt19937_64 rng(seed);
        for (int i = 0; i < 12; ++i) {
            auto r = rule(static_cast<int>(rng() % 4), Action::forward(static_cast<PortId>(i)));
            if (rng() % 2) {
                const std::uint64_t m = 1ULL << (rng() % 40);
                r.ts_match = TernaryPattern{(rng() % 2) ? m : 0, m};
            }
            if (rng() % 3 == 0)
                r.key.dport = static_cast<std::uint16_t>(rng() % 3);
            t.install(r);
        }
        std::vector<std::uint64_t> fired;
        for (int i = 0; i < 5'000; ++i) {
            auto p = data_packet(static_cast<std::uint64_t>(i));
            p.key.dport = static_cast<std::uint16_t>(rng() % 3);
            if (rng() % 4)
                p.dpt = NtpTimestamp::from_raw(rng());
            fired.push_back(match(p, t).id);
        }
        REQUIRE(t.counted_packets() == t.offered());
        REQUIRE(t.offered() == 5'000);
        return fired;
    };
    CHECK(run(17) == run(17));
}

TEST_CASE("record_ts keeps the first packet of each block")
{
    TsRegister reg;
    reg.block_lsb = BitIndex::sec(1);
    ClockModel local{Time::seconds(0.001), 0, 0};

    auto p = data_packet(1);
    p.dpt = now(ClockModel{}, Time::seconds(10.0));
    CHECK(record_ts(p, reg, local, Time::seconds(10.0)));
    CHECK(reg.valid);
    CHECK(reg.last_dpth == NtpTimestamp{10, 0});
    CHECK(reg.local_time == now(ClockModel{}, Time::seconds(10.001)));

    auto second = data_packet(2);
    second.dpt = now(ClockModel{}, Time::seconds(10.4));
    CHECK(!record_ts(second, reg, local, Time::seconds(10.4)));
    CHECK(reg.last_dpth == NtpTimestamp{10, 0});

    auto next_block = data_packet(3);
    next_block.dpt = now(ClockModel{}, Time::seconds(11.25));
    CHECK(record_ts(next_block, reg, local, Time::seconds(11.25)));
    CHECK(reg.last_dpth == NtpTimestamp{11, 1U << 30});
    CHECK(reg.local_time == now(ClockModel{}, Time::seconds(11.251)));

    CHECK(!record_ts(data_packet(4), reg, local, Time::seconds(12)));
}

TEST_CASE("switch edge handling: version and colour marks stay inside the domain")
{
    Switch s(1, "S", {}, 3);
    s.set_edge_port(1);
    s.set_edge_port(3, false);
    s.set_version_policy(7);
    s.set_color_policy(1);
    FlowRule tagged = rule(5, Action::forward(2));
    tagged.tag_match = 7;
    s.table().install(default_drop());
    s.table().install(tagged);

    auto p = data_packet(1);
    auto v = s.process(p, 1, Time::seconds(1));
    CHECK(v.forward);
    CHECK(v.port == 2);
    CHECK(p.version_tag == 7U);
    CHECK(p.color == 1);

    // A plain forward to a host-facing port leaks the DPTH.
    Switch leaky(2, "L", {}, 3);
    leaky.set_edge_port(3, false);
    leaky.table().install(rule(1, Action::forward(3)));
    auto q = p;
    leaky.process(q, 1, Time::seconds(1));
    CHECK(!q.version_tag);
    CHECK(!q.color);
    CHECK(leaky.dpt_leaks() == 1);
}

TEST_CASE("spray and hash group actions")
{
    Switch s(1, "S", {}, 99);
    s.table().install(rule(1, Action::spray({10, 11})));
    int to10 = 0;
    for (int i = 0; i < 10'000; ++i) {
        auto p = data_packet(static_cast<std::uint64_t>(i));
        to10 += s.process(p, 1, Time{}).port == 10 ? 1 : 0;
    }
    CHECK(to10 > 4'700);
    CHECK(to10 < 5'300);

    Switch h(2, "H", {}, 99);
    h.table().install(rule(1, Action::hash({10, 11, 12})));
    auto first = data_packet(0);
    const auto port = h.process(first, 1, Time{}).port;
    for (int i = 1; i < 100; ++i) {
        auto p = data_packet(static_cast<std::uint64_t>(i));
        REQUIRE(h.process(p, 1, Time{}).port == port);
    }
}

TEST_CASE("PUSH_DPT action pushes and resubmits")
{
    Switch s(1, "S", {}, 1);
    FlowRule push = rule(10, Action::push_dpt());
    push.key.in_port = 1;
    s.table().install(push);
    FlowRule late = rule(20, Action::forward(2), TernaryPattern{1ULL << 32, 1ULL << 32});
    s.table().install(late);
    FlowRule early = rule(5, Action::forward(3));
    s.table().install(early);

    auto p = data_packet(1);
    auto v = s.process(p, 1, Time::seconds(1.5));
    CHECK(v.port == 2);
    CHECK(p.dpt);
    CHECK(s.table().offered() == 2);
    CHECK(s.table().counted_packets() == 2);
}
