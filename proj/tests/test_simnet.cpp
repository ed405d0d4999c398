#include <doctest.h>

#include "dptnet/error.hpp"
#include "dptnet/simnet.hpp"

#include <random>

using namespace dptnet;

namespace {

struct Line {
    NodeId h1, s1, s2, h2;
    std::size_t access1, core, access2;
};

FlowRule fwd(PortId in, Action a)
{
    FlowRule r;
    r.priority = 10;
    r.key.in_port = in;
    r.action = std::move(a);
    return r;
}

void install_default(Switch& s)
{
    FlowRule d;
    d.priority = 0;
    d.action = Action::drop();
    s.table().install(d);
}

// h1 - S1 - S2 - h2 with a configurable S1-S2 core link. S1 pushes the DPTH
// for h1's traffic, S2 pops it, and the reverse direction mirrors that.
Line build_line(Network& net, std::uint64_t core_rate, std::uint32_t queue = kDefaultQueueCap, double loss = 0.0)
{
    Line l;
    l.h1 = net.add_host("h1");
    l.s1 = net.add_switch("S1");
    l.s2 = net.add_switch("S2");
    l.h2 = net.add_host("h2");
    LinkSpec fast;
    fast.rate_bps = 100'000'000;
    fast.queue_cap = 1000;
    fast.a = l.h1;
    fast.b = l.s1;
    l.access1 = net.add_link(fast);
    LinkSpec core;
    core.a = l.s1;
    core.b = l.s2;
    core.rate_bps = core_rate;
    core.queue_cap = queue;
    core.loss = loss;
    l.core = net.add_link(core);
    fast.a = l.s2;
    fast.b = l.h2;
    l.access2 = net.add_link(fast);

    for (auto [s, host, peer] : {std::tuple{l.s1, l.h1, l.s2}, std::tuple{l.s2, l.h2, l.s1}}) {
        auto& sw = net.sw(s);
        install_default(sw);
        sw.table().install(fwd(net.port_towards(s, host), Action::forward(net.port_towards(s, peer))));
        sw.table().install(fwd(net.port_towards(s, peer), Action::pop_and_forward(net.port_towards(s, host))));
    }
    return l;
}

TraceSummary cbr_run(std::uint64_t seed, std::uint64_t rate, double loss, Time duration = Time::seconds(10))
{
    Network net(seed);
    auto l = build_line(net, 10'000'000, kDefaultQueueCap, loss);
    CbrSpec f;
    f.id = 1;
    f.src = l.h1;
    f.dst = l.h2;
    f.rate_bps = rate;
    net.add_cbr(f);
    return net.run(duration);
}

}  // namespace

TEST_CASE("scheduler runs events in (time, insertion) order")
{
    Scheduler s;
    std::vector<int> order;
    s.schedule(Time::seconds(2), EventKind::Timer, [&] { order.push_back(3); });
    s.schedule(Time::seconds(1), EventKind::Timer, [&] { order.push_back(1); });
    s.schedule(Time::seconds(1), EventKind::Arrival, [&] { order.push_back(2); });
    s.schedule(Time::seconds(5), EventKind::Timer, [&] { order.push_back(9); });
    CHECK(s.run_until(Time::seconds(5)) == 3);
    CHECK(order == std::vector<int>{1, 2, 3});
    CHECK(s.pending() == 1);
    CHECK_THROWS(s.schedule(Time::seconds(1), EventKind::Timer, [] {}));
}

TEST_CASE("property: random schedules drain in sorted order")
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        Scheduler s;
        std::vector<std::pair<std::int64_t, int>> seen;
        int label = 0;
        for (int i = 0; i < 200; ++i) {
            const auto t = static_cast<std::int64_t>(rng() % 50);
            const int me = label++;
            s.schedule(Time::from_ticks(t), EventKind::Timer, [&, t, me, i] {
                seen.push_back({t, me});
                if (i % 7 == 0) {  // events that schedule more events
                    const auto later = t + static_cast<std::int64_t>(rng() % 5);
                    s.schedule(Time::from_ticks(later), EventKind::Timer,
                               [&, later] { seen.push_back({later, 1'000'000}); });
                }
            });
        }
        s.run_until(Time::from_ticks(1'000));
        for (std::size_t i = 1; i < seen.size(); ++i)
            REQUIRE(seen[i - 1].first <= seen[i].first);
    }
}

TEST_CASE("CBR under capacity is delivered in full")
{
    auto s = cbr_run(1, 5'000'000, 0.0);
    REQUIRE(s.flows.size() == 1);
    const double quantum = 1500.0 * 8 / 10.0;
    CHECK(std::abs(s.flows[0].goodput_bps - 5e6) <= 2 * quantum);
    std::uint64_t drops = 0;
    for (const auto& c : s.channels)
        drops += c.c.queue_dropped + c.c.loss_dropped;
    CHECK(drops == 0);
    CHECK(s.dpt_leaks == 0);
}

TEST_CASE("CBR at twice the bottleneck saturates it and drops about half")
{
    auto s = cbr_run(1, 20'000'000, 0.0);
    const double expect = 10e6 * 1500.0 / 1508.0;
    CHECK(s.flows[0].goodput_bps == doctest::Approx(expect).epsilon(0.005));
    const auto& core = s.channels[2];  // S1 -> S2
    CHECK(core.name == "S1-S2");
    const double frac = static_cast<double>(core.c.queue_dropped) / static_cast<double>(core.c.offered);
    CHECK(frac == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("same seed gives an identical trace; loss draws depend on the seed")
{
    CHECK(cbr_run(7, 20'000'000, 0.05).fingerprint() == cbr_run(7, 20'000'000, 0.05).fingerprint());
    CHECK(cbr_run(7, 5'000'000, 0.05).fingerprint() != cbr_run(8, 5'000'000, 0.05).fingerprint());
}

TEST_CASE("inject_loss at the extremes")
{
    for (double p : {0.0, 1.0}) {
        Network net(3);
        auto l = build_line(net, 10'000'000);
        net.inject_loss(l.core, p, 99);
        CbrSpec f;
        f.id = 1;
        f.src = l.h1;
        f.dst = l.h2;
        f.rate_bps = 1'000'000;
        net.add_cbr(f);
        auto s = net.run(Time::seconds(2));
        std::uint64_t lost = 0;
        for (const auto& d : s.drops)
            lost += d.reason == DropReason::Loss ? 1 : 0;
        if (p == 0.0) {
            CHECK(lost == 0);
        } else {
            CHECK(s.flows[0].delivered_packets == 0);
            CHECK(lost == s.channels[2].c.offered);
        }
    }
    Network net(1);
    build_line(net, 1'000'000);
    CHECK_THROWS_AS(net.inject_loss(0, 1.5, 1), TopologyError);
    CHECK_THROWS_AS(net.inject_loss(17, 0.5, 1), TopologyError);
}

TEST_CASE("property: per-link conservation and end-to-end accounting on random lines")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 25; ++trial) {
        Network net(rng());
        auto l = build_line(net, 1'000'000 + rng() % 20'000'000, 1 + static_cast<std::uint32_t>(rng() % 40),
                            static_cast<double>(rng() % 100) / 400.0);
        CbrSpec f;
        f.id = 3;
        f.src = l.h1;
        f.dst = l.h2;
        f.rate_bps = 1'000'000 + rng() % 30'000'000;
        f.size = 64 + static_cast<std::uint32_t>(rng() % 1437);
        net.add_cbr(f);
        auto s = net.run(Time::milliseconds(50 + static_cast<double>(rng() % 500)));  // run() checks conservation
        std::uint64_t dropped = 0, in_flight = 0;
        for (const auto& c : s.channels) {
            REQUIRE(c.c.offered == c.c.delivered + c.c.queue_dropped + c.c.loss_dropped + c.c.in_flight);
            dropped += c.c.queue_dropped + c.c.loss_dropped;
            in_flight += c.c.in_flight;
        }
        REQUIRE(s.flows[0].sent_packets == s.flows[0].delivered_packets + dropped + in_flight);
        REQUIRE(s.drops.size() == dropped);
    }
}

TEST_CASE("AIMD fills a lossless bottleneck within five seconds")
{
    Network net(5);
    auto l = build_line(net, 10'000'000);
    AimdSpec f;
    f.id = 1;
    f.src = l.h1;
    f.dst = l.h2;
    net.add_aimd(f);
    auto s = net.run(Time::seconds(5));
    const double capacity = 10e6 * 1500.0 / 1508.0;
    INFO("goodput " << s.flows[0].goodput_bps);
    CHECK(s.flows[0].goodput_bps >= 0.9 * capacity);
}

TEST_CASE("dangling ports are rejected before the run starts")
{
    Network net(1);
    auto l = build_line(net, 1'000'000);
    net.sw(l.s1).table().install(fwd(77, Action::forward(9)));
    CHECK_THROWS_AS(net.run(Time::seconds(1)), TopologyError);

    Network lonely(1);
    lonely.add_host("h");
    CHECK_THROWS_AS(lonely.run(Time::seconds(1)), TopologyError);

    Network bad(1);
    const auto a = bad.add_switch("A");
    LinkSpec ls;
    ls.a = a;
    ls.b = 42;
    CHECK_THROWS_AS(bad.add_link(ls), TopologyError);
}

TEST_CASE("control messages are delayed, FIFO per switch and counted once each")
{
    Network net(1);
    auto l = build_line(net, 1'000'000);
    std::vector<std::pair<int, Time>> applied;
    net.at(Time::seconds(1), [&](Time) {
        net.send_control(MessageKind::SetTagPolicy, l.s1, "t", [&](Switch&, Time t) { applied.push_back({1, t}); });
        net.send_control(MessageKind::ReadCounters, l.s1, "t", [&](Switch&, Time t) { applied.push_back({2, t}); });
        net.send_control(MessageKind::ReadCounters, l.s2, "u", [&](Switch&, Time t) { applied.push_back({3, t}); });
    });
    auto s = net.run(Time::seconds(2));
    REQUIRE(applied.size() == 3);
    CHECK(applied[0].first == 1);
    CHECK(applied[1].first == 2);
    CHECK(applied[0].second == Time::seconds(1) + Time::milliseconds(1));
    CHECK(s.messages.count() == 3);
    CHECK(s.messages.count("t") == 2);
    CHECK(s.messages.count("t", MessageKind::ReadCounters) == 1);
    CHECK(s.messages.to_csv().rfind("time,app,kind,target", 0) == 0);
}
