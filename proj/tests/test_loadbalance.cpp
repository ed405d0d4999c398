#include <doctest.h>

#include "dptnet/error.hpp"
#include "dptnet/loadbalance.hpp"

#include <cmath>
#include <array>
#include <random>
#include <set>

using namespace dptnet;

namespace {

Packet stamped(std::uint64_t raw, std::uint16_t sport = 1000)
{
    Packet p;
    p.id = raw;
    p.key = {1, 2, 6, sport, 5001};
    p.size = 1508;
    p.dpt = NtpTimestamp::from_raw(raw);
    return p;
}

std::size_t run_length_max(const std::vector<std::size_t>& paths)
{
    std::size_t best = 0, cur = 0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        cur = (i && paths[i] == paths[i - 1]) ? cur + 1 : 1;
        best = std::max(best, cur);
    }
    return best;
}

}  // namespace

TEST_CASE("toggle interval examples")
{
    auto fast = compute_toggle_interval(20'000'000'000ULL, 1500);
    CHECK(fast.bit == BitIndex::frac(12));
    CHECK(std::abs(fast.half_period.to_seconds() - 0.477e-6) < 0.001e-6);

    auto slow = compute_toggle_interval(20'000'000, 1500);
    CHECK(slow.bit == BitIndex::frac(22));
    CHECK(std::abs(slow.half_period.to_seconds() - 488.3e-6) < 0.1e-6);
    CHECK(std::abs(slow.inter_packet.to_seconds() - 600e-6) < 1e-9);

    CHECK_THROWS_AS(compute_toggle_interval(0, 1500), RangeError);
}

TEST_CASE("toggle interval at an exact power of two")
{
    // 1500 B at 24.576 Mb/s is exactly 2^21 ticks apart.
    CHECK(compute_toggle_interval(24'576'000, 1500).bit == BitIndex::frac(22));
    CHECK(compute_toggle_interval(24'576'001, 1500).bit == BitIndex::frac(21));

    std::mt19937_64 rng(31);
    for (int i = 0; i < 5'000; ++i) {
        const std::uint64_t rate = 1'000 + rng() % 100'000'000'000ULL;
        const auto mtu = static_cast<std::uint32_t>(64 + rng() % 9'000);
        const auto t = compute_toggle_interval(rate, mtu);
        REQUIRE(t.half_period <= t.inter_packet);
        REQUIRE(t.inter_packet < t.half_period * 2);
    }
}

TEST_CASE("one bit splits two paths A on 0 and B on 1")
{
    const auto bit = BitIndex::frac(22);
    auto p = make_dpt_policy({1, 1}, bit);
    REQUIRE(p.slot_bits == 1);
    CHECK(p.slot_table == std::vector<std::size_t>{0, 1});
    Rng rng(1);
    std::mt19937_64 gen(5);
    for (int i = 0; i < 2'000; ++i) {
        const auto raw = gen();
        REQUIRE(balance(p, stamped(raw), rng) == static_cast<std::size_t>((raw >> bit.position()) & 1));
    }
}

TEST_CASE("weights that do not sum to a power of two are refused")
{
    CHECK_THROWS_AS(make_dpt_policy({3, 2}, BitIndex::frac(20)), RangeError);
    CHECK_THROWS_AS(make_dpt_policy({}, BitIndex::frac(20)), RangeError);
    CHECK_THROWS_AS(make_dpt_policy({0, 0}, BitIndex::frac(20)), RangeError);
    auto one = make_dpt_policy({1}, BitIndex::frac(20));
    CHECK(one.slot_table == std::vector<std::size_t>{0, 0});
}

TEST_CASE("ECMP keeps a flow on one path")
{
    auto p = make_ecmp_policy(2);
    Rng rng(3);
    std::mt19937_64 gen(8);
    std::set<std::size_t> seen_flows;
    for (std::uint16_t sport = 1000; sport < 1064; ++sport) {
        const auto first = balance(p, stamped(gen(), sport), rng);
        seen_flows.insert(first);
        for (int i = 0; i < 50; ++i)
            REQUIRE(balance(p, stamped(gen(), sport), rng) == first);
    }
    CHECK(seen_flows.size() == 2);
}

TEST_CASE("4:3:1 weights give their shares over 1e5 packets")
{
    const auto bit = BitIndex::frac(22);
    auto p = make_dpt_policy({4, 3, 1}, bit);
    REQUIRE(p.slot_bits == 3);
    CHECK(p.slots_of(0).size() == 4);
    CHECK(p.slots_of(1).size() == 3);
    CHECK(p.slots_of(2).size() == 1);

    // Through a switch, so the installed entries are what is measured.
    Switch sw(1, "S", ClockModel{}, 1);
    FlowRule base;
    base.priority = 10;
    for (auto& r : balance_rules(p, {1, 2, 3}, base))
        sw.table().install(std::move(r));

    std::mt19937_64 gen(77);
    std::array<std::uint64_t, 3> count{};
    const int n = 100'000;
    std::uint64_t t = gen() >> 4;
    Rng unused(0);
    for (int i = 0; i < n; ++i) {
        t += 2'000'000 + gen() % 1'000'000;  // ~0.5 ms apart, unaligned with the slots
        Packet pkt = stamped(t);
        const auto expect = balance(p, pkt, unused);
        auto v = sw.process(pkt, 9, Time{});
        REQUIRE(v.forward);
        REQUIRE(v.port == expect + 1);
        ++count[expect];
    }
    const double want[] = {0.5, 0.375, 0.125};
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(static_cast<double>(count[i]) / n - want[i]) <= 0.02);
}

TEST_CASE("switch rules agree with balance() for every mode")
{
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 40; ++trial) {
        const int paths = 1 + static_cast<int>(gen() % 4);
        std::vector<std::uint32_t> w(static_cast<std::size_t>(paths), 0);
        const std::uint32_t total = 1U << (2 + gen() % 3);
        for (std::uint32_t k = 0; k < total; ++k)
            ++w[gen() % w.size()];
        const auto bit = BitIndex::from_position(static_cast<int>(gen() % 56));
        std::vector<PortId> ports;
        for (int i = 0; i < paths; ++i)
            ports.push_back(static_cast<PortId>(10 + i));

        for (auto policy : {make_dpt_policy(w, bit), make_ecmp_policy(ports.size())}) {
            Switch sw(1, "S", ClockModel{}, 1);
            FlowRule base;
            base.priority = 5;
            for (auto& r : balance_rules(policy, ports, base))
                sw.table().install(std::move(r));
            Rng rng(0);
            for (int i = 0; i < 500; ++i) {
                Packet pkt = stamped(gen(), static_cast<std::uint16_t>(gen()));
                const auto expect = ports[balance(policy, pkt, rng)];
                auto v = sw.process(pkt, 1, Time{});
                REQUIRE(v.forward);
                REQUIRE(v.port == expect);
            }
        }
    }
}

TEST_CASE("RPS spreads evenly and ignores the timestamp")
{
    auto p = make_rps_policy(2);
    Rng rng(4);
    std::uint64_t zero = 0;
    for (int i = 0; i < 20'000; ++i)
        zero += balance(p, stamped(42), rng) == 0;
    CHECK(std::abs(static_cast<double>(zero) / 20'000 - 0.5) < 0.02);
}

TEST_CASE("run length under CBR is bounded by the toggle interval")
{
    // Holds whenever no slot can be skipped for long: half period >= ipt, or
    // ipt <= 1.5 half periods. Closer to two half periods CBR aliases; see below.
    std::mt19937_64 gen(2024);
    Rng rng(0);
    int computed_checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const std::uint64_t rate = 1'000'000 + gen() % 40'000'000'000ULL;
        const std::uint32_t mtu = 64 + static_cast<std::uint32_t>(gen() % 9'000);
        const auto t = compute_toggle_interval(rate, mtu);
        const auto ipt = static_cast<std::uint64_t>(t.inter_packet.ticks());
        for (int up = 0; up <= 4; ++up) {
            const auto bit = BitIndex::from_position(std::min(63, t.bit.position() + up));
            const auto half = static_cast<std::uint64_t>(toggle_half_period(bit).ticks());
            if (half < ipt && 2 * ipt > 3 * half)
                continue;
            computed_checked += up == 0;
            auto p = make_dpt_policy({1, 1}, bit);
            std::uint64_t ts = gen() >> 2;
            std::vector<std::size_t> paths;
            for (int i = 0; i < 400; ++i, ts += ipt)
                paths.push_back(balance(p, stamped(ts), rng));
            const std::size_t bound = static_cast<std::size_t>((half + ipt - 1) / ipt) + 1;
            REQUIRE(run_length_max(paths) <= bound);
        }
    }
    CHECK(computed_checked > 100);
}

TEST_CASE("CBR near twice the toggle half period aliases into long runs")
{
    const auto bit = BitIndex::frac(22);
    const auto half = static_cast<std::uint64_t>(toggle_half_period(bit).ticks());
    auto p = make_dpt_policy({1, 1}, bit);
    Rng rng(0);
    std::vector<std::size_t> paths;
    std::uint64_t ts = 0;
    for (int i = 0; i < 400; ++i, ts += half * 19 / 10)
        paths.push_back(balance(p, stamped(ts), rng));
    CHECK(run_length_max(paths) >= 5);
    // The 20 Mb/s elephant sits at 1.23 half periods, inside the bounded regime.
    const auto t = compute_toggle_interval(20'000'000, 1500);
    CHECK(2 * t.inter_packet.ticks() <= 3 * t.half_period.ticks());
}

TEST_CASE("two_path run: DPT uses both paths and ECMP one")
{
    BalanceSetup s;
    s.duration = Time::seconds(4);
    const auto topo = two_path_topology();
    auto dpt = run_balance(topo, s, BalanceMode::Dpt, 3);
    auto ecmp = run_balance(topo, s, BalanceMode::Ecmp, 3);
    CHECK(dpt.bit == BitIndex::frac(22));
    CHECK(dpt.path_rate_bps == 20'000'000);
    REQUIRE(dpt.path_packets.size() == 2);
    const double a = static_cast<double>(dpt.path_packets[0]), b = static_cast<double>(dpt.path_packets[1]);
    CHECK(std::abs(a - b) / (a + b) < 0.05);
    CHECK((ecmp.path_packets[0] == 0 || ecmp.path_packets[1] == 0));
    CHECK(ecmp.goodput_bps < 0.5 * 20e6);
    CHECK(dpt.goodput_bps > ecmp.goodput_bps * 1.5);
    CHECK(dpt.trace.dpt_leaks == 0);
}

TEST_CASE("two_path runs are deterministic")
{
    BalanceSetup s;
    s.duration = Time::seconds(2);
    for (auto m : {BalanceMode::Dpt, BalanceMode::Rps, BalanceMode::Ecmp}) {
        auto a = run_balance(two_path_topology(), s, m, 6);
        auto b = run_balance(two_path_topology(), s, m, 6);
        CHECK(balance_csv_row(a) == balance_csv_row(b));
        CHECK(a.trace.fingerprint() == b.trace.fingerprint());
    }
}

TEST_CASE("balancer off the path or unknown is a topology error")
{
    BalanceSetup s;
    s.duration = Time::seconds(1);
    s.balancer = "S9";
    CHECK_THROWS_AS(run_balance(two_path_topology(), s, BalanceMode::Dpt, 1), TopologyError);
    auto topo = two_path_topology();
    topo.nodes.push_back({"S4", true, {}, 0});
    topo.links.push_back({"S4", "S1", LinkSpec{}});
    s.balancer = "S4";
    CHECK_THROWS_AS(run_balance(topo, s, BalanceMode::Dpt, 1), TopologyError);
    s.balancer = "S2";
    s.weights = {1, 1, 2};
    CHECK_THROWS_AS(run_balance(two_path_topology(), s, BalanceMode::Dpt, 1), RangeError);
}
