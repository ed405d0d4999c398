#include <doctest.h>

#include "dptnet/config.hpp"
#include "dptnet/error.hpp"
#include "dptnet/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace dptnet;

namespace {

std::string slurp(const std::string& rel)
{
    std::ifstream f(std::string(DPTNET_SOURCE_DIR) + "/" + rel, std::ios::binary);
    REQUIRE(f);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<ConfigDiagnostic> diagnostics_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.diagnostics();
    }
    return {};
}

bool has_line(const std::vector<ConfigDiagnostic>& d, int line)
{
    return std::any_of(d.begin(), d.end(), [&](const ConfigDiagnostic& x) { return x.line == line; });
}

}  // namespace

TEST_CASE("value parsers")
{
    CHECK(parse_duration("10ms") == Time::milliseconds(10));
    CHECK(parse_duration("1.5") == Time::seconds(1.5));
    CHECK(parse_duration("-10s") == Time::seconds(-10));
    CHECK(parse_duration("100 us") == Time::microseconds(100));
    CHECK(!parse_duration("10 parsecs"));
    CHECK(!parse_duration(""));

    CHECK(parse_rate("10Mbps") == 10'000'000U);
    CHECK(parse_rate("2.4M") == 2'400'000U);
    CHECK(parse_rate("240kbps") == 240'000U);
    CHECK(parse_rate("1G") == 1'000'000'000U);
    CHECK(parse_rate("9600") == 9'600U);
    CHECK(!parse_rate("-1M"));
    CHECK(!parse_rate("fast"));

    CHECK(parse_ntp_seconds("1073741824") == std::uint64_t{1} << 62);
    CHECK(parse_ntp_seconds("0.5") == std::uint64_t{1} << 31);
    CHECK(parse_ntp_seconds("3.25") == ((std::uint64_t{3} << 32) | (std::uint64_t{1} << 30)));
    CHECK(!parse_ntp_seconds("4294967296"));
    CHECK(!parse_ntp_seconds("1."));

    CHECK(split_list("a, b ,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(parse_bool("yes") == true);
    CHECK(!parse_bool("maybe"));
}

TEST_CASE("minimal two-node telemetry config fills defaults")
{
    auto cfg = parse_config(slurp("tests/data/minimal_telemetry.conf"));
    CHECK(cfg.kind == ExperimentKind::Telemetry);
    CHECK(cfg.seed == 1);
    CHECK(cfg.topology.nodes.size() == 2);
    REQUIRE(cfg.topology.links.size() == 1);
    CHECK(cfg.topology.links[0].spec.queue_cap == kDefaultQueueCap);
    CHECK(cfg.topology.links[0].spec.delay == Time::milliseconds(1));
    CHECK(cfg.telemetry.pairs == std::vector<int>{1});
    CHECK(cfg.telemetry.methods.size() == 2);
    CHECK(cfg.telemetry.base.intervals == TelemetryConfig{}.intervals);
    CHECK(cfg.telemetry.base.core_rate == 10'000'000);
    CHECK(cfg.telemetry.base.loss == 0.0);
}

TEST_CASE("the shipped two_path config parses to five nodes and its link rates")
{
    auto cfg = parse_config(slurp("configs/two_path.conf"));
    CHECK(cfg.kind == ExperimentKind::LoadBalance);
    CHECK(cfg.topology.nodes.size() == 5);
    std::vector<std::uint64_t> rates;
    for (const auto& l : cfg.topology.links)
        rates.push_back(l.spec.rate_bps);
    CHECK(rates == std::vector<std::uint64_t>{25'000'000, 25'000'000, 10'000'000, 10'000'000, 25'000'000});
    CHECK(cfg.balance.setup.src == "src");
    CHECK(cfg.balance.setup.dst == "dst");
    CHECK(cfg.balance.setup.balancer == "S2");
    CHECK(cfg.balance.setup.duration == Time::seconds(10));
    CHECK(cfg.balance.seeds == 20);
    CHECK(cfg.balance.sweep_bits.size() == 18);
    CHECK(cfg.balance.sweep_bits.front() == BitIndex::frac(14));

    // The config and the built-in topology describe the same network.
    const auto builtin = two_path_topology();
    REQUIRE(builtin.links.size() == cfg.topology.links.size());
    for (std::size_t i = 0; i < builtin.links.size(); ++i) {
        CHECK(builtin.links[i].a == cfg.topology.links[i].a);
        CHECK(builtin.links[i].b == cfg.topology.links[i].b);
        CHECK(builtin.links[i].spec.rate_bps == cfg.topology.links[i].spec.rate_bps);
        CHECK(builtin.links[i].spec.queue_cap == cfg.topology.links[i].spec.queue_cap);
        CHECK(builtin.links[i].spec.jitter == cfg.topology.links[i].spec.jitter);
    }
}

TEST_CASE("other shipped configs parse")
{
    auto t = parse_config(slurp("configs/telemetry.conf"));
    CHECK(t.telemetry.pairs == std::vector<int>{4, 8, 16, 24});
    CHECK(t.telemetry.base.loss == 0.01);
    CHECK(t.telemetry.base.intervals == 62);
    auto u = parse_config(slurp("configs/updates.conf"));
    CHECK(u.updates.switches == std::vector<int>{12, 24, 48});
    CHECK(u.updates.base.flow_rate == 2'000'000);
    CHECK(u.updates.base.packet_size == 1000);
}

TEST_CASE("every problem is reported with its line")
{
    const auto d = diagnostics_of(slurp("tests/data/bad.conf"));
    CHECK(d.size() >= 5);
    CHECK(has_line(d, 3));   // bad duration
    CHECK(has_line(d, 10));  // undefined link endpoint
    CHECK(has_line(d, 11));  // unknown key
    CHECK(has_line(d, 13));  // flow endpoints
    CHECK(std::is_sorted(d.begin(), d.end(), [](auto& a, auto& b) { return a.line < b.line; }));
}

TEST_CASE("link to an undefined node is one aggregated report")
{
    const std::string text = "[experiment]\nkind = telemetry\n[node]\nname = S1\n[link]\na = S1\nb = S9\n";
    const auto d = diagnostics_of(text);
    REQUIRE(d.size() == 1);
    CHECK(d[0].line == 7);
    CHECK(d[0].message.find("S9") != std::string::npos);
}

TEST_CASE("syntax errors")
{
    CHECK(has_line(diagnostics_of("x = 1\n[experiment]\nkind = encode\n"), 1));
    CHECK(has_line(diagnostics_of("[experiment\nkind = encode\n"), 1));
    CHECK(has_line(diagnostics_of("[experiment]\nkind = encode\nkind = telemetry\n"), 3));
    CHECK(has_line(diagnostics_of("[experiment]\nkind = encode\njust words\n"), 3));
    CHECK(has_line(diagnostics_of("[experiment]\nkind = telemetry\n[bogus]\n"), 3));
    CHECK(!diagnostics_of("[experiment]\nkind = chess\n").empty());
    CHECK(!diagnostics_of("[app]\npairs = 2\n").empty());
    // Type mismatches.
    CHECK(has_line(diagnostics_of("[experiment]\nkind = telemetry\n[app]\npairs = 4,x\n"), 4));
    CHECK(has_line(diagnostics_of("[experiment]\nkind = telemetry\n[app]\nblock_bit = SEC\n"), 4));
    CHECK(has_line(diagnostics_of("[experiment]\nkind = updates\n[app]\nmethods = three_phase\n"), 4));
}

TEST_CASE("experiment-specific checks")
{
    CHECK(!diagnostics_of("[experiment]\nkind = telemetry\nduration = 10s\n[app]\nintervals = 5\n").empty());
    auto t = parse_config("[experiment]\nkind = telemetry\nduration = 10s\n");
    CHECK(t.telemetry.base.intervals == 10);
    CHECK(!diagnostics_of("[experiment]\nkind = updates\n[node]\nname = a\n").empty());
    CHECK(!diagnostics_of("[experiment]\nkind = updates\nduration = 1s\n").empty());
    CHECK(!diagnostics_of("[experiment]\nkind = encode\n[app]\nwidth = 16\n").empty());
    CHECK(!diagnostics_of("[experiment]\nkind = encode\n[app]\nperiodic = 2:4\n").empty());
    CHECK(!diagnostics_of("[experiment]\nkind = loadbalance\n").empty());
}

TEST_CASE("overrides address every section or one by index")
{
    auto raw = parse_raw(slurp("configs/two_path.conf"));
    apply_override(raw, "link.delay", "3ms");
    apply_override(raw, "link#3.queue", "4");
    apply_override(raw, "app.seeds", "2");
    auto cfg = validate_config(raw);
    for (const auto& l : cfg.topology.links)
        CHECK(l.spec.delay == Time::milliseconds(3));
    CHECK(cfg.topology.links[2].spec.queue_cap == 4);
    CHECK(cfg.topology.links[3].spec.queue_cap == 8);
    CHECK(cfg.balance.seeds == 2);
    CHECK_THROWS_AS(apply_override(raw, "nothing.here", "1"), ConfigError);
    CHECK_THROWS_AS(apply_override(raw, "nodot", "1"), ConfigError);
    CHECK_THROWS_AS(apply_override(raw, "link#9.rate", "1M"), ConfigError);
}

TEST_CASE("encode through a config matches the golden files")
{
    auto a = parse_config("[experiment]\nkind = encode\n[app]\nextremal = 1073741824\nwidth = 32\n");
    CHECK(encode_text(a.encode) == slurp("tests/golden/encode_extremal_2pow30.txt"));
    auto b = parse_config("[experiment]\nkind = encode\n[app]\nperiodic = 1:1\nbit = FRAC:32\n");
    CHECK(encode_text(b.encode) == slurp("tests/golden/encode_periodic_frac_msb.txt"));
}

TEST_CASE("encode rounds an unaligned T0 up and rejects overflow")
{
    EncodeApp e;
    e.extremal = parse_ntp_seconds("5.5");
    e.width = 32;
    const auto text = encode_text(e);
    CHECK(text.find("rounded up to 6 s") != std::string::npos);
    e.extremal = parse_ntp_seconds("4294967295.5");
    CHECK_THROWS_AS(encode_text(e), RangeError);
}

TEST_CASE("balance config with explicit ports runs")
{
    auto cfg = parse_config(slurp("tests/data/small_balance.conf"));
    CHECK(cfg.topology.links[1].spec.a_port == PortId{7});
    const auto sweep = run_balance_sweep(cfg.topology, cfg.balance, cfg.seed);
    CHECK(sweep.path_rate_bps == 20'000'000);
    REQUIRE(sweep.find(BalanceMode::Dpt));
    REQUIRE(sweep.find(BalanceMode::Ecmp));
    CHECK(sweep.find(BalanceMode::Dpt)->goodput_bps.size() == 2);
    CHECK(sweep.find(BalanceMode::Dpt)->median_bps > sweep.find(BalanceMode::Ecmp)->median_bps);
}
