#include "dptnet/experiment.hpp"

#include "dptnet/error.hpp"
#include "dptnet/trange.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace dptnet {

namespace {

std::string fmt(const char* f, double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string seconds_text(std::uint64_t raw)
{
    const auto ts = NtpTimestamp::from_raw(raw);
    if (ts.frac == 0)
        return std::to_string(ts.sec);
    return fmt("%.10f", static_cast<double>(ts.sec) + static_cast<double>(ts.frac) * 0x1.0p-32);
}

// Prepends `col=value` to every row of a CSV that has a header line.
std::string prefix_csv(const std::string& csv, const std::string& col, const std::string& value, bool header)
{
    std::istringstream in(csv);
    std::string line, out;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            if (header)
                out += col + "," + line + "\n";
            continue;
        }
        out += value + "," + line + "\n";
    }
    return out;
}

void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& body,
                std::vector<std::string>& files)
{
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error("cannot write " + (dir / name).string());
    f << body;
    files.push_back(name);
}

void write_trace(const std::filesystem::path& dir, const TraceSummary& t, std::vector<std::string>& files)
{
    write_file(dir, "trace_flows.csv", t.flows_csv(), files);
    write_file(dir, "trace_links.csv", t.links_csv(), files);
    write_file(dir, "trace_rules.csv", t.rules_csv(), files);
    write_file(dir, "trace_drops.csv", t.drops_csv(), files);
}

RunOutcome run_telemetry_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out)
{
    RunOutcome o;
    const auto& app = cfg.telemetry;
    std::string blocks_csv, summary = "pairs,intervals,blocks,color_messages,dpt_messages,ratio,exact\n";
    std::map<TelemetryMethod, std::string> ledgers;
    std::ostringstream text;
    bool all_exact = true, traced = false;
    for (int m : app.pairs) {
        auto tc = app.base;
        tc.pairs = m;
        std::map<TelemetryMethod, TelemetryResult> res;
        for (auto method : app.methods) {
            res[method] = run_telemetry(tc, method, cfg.seed);
            const auto& r = res[method];
            blocks_csv += prefix_csv(r.csv(), "pairs", std::to_string(m), blocks_csv.empty());
            auto& l = ledgers[method];
            l += prefix_csv(r.trace.messages.to_csv(), "pairs", std::to_string(m), l.empty());
            all_exact = all_exact && r.exact();
            if (!traced) {
                write_trace(out, r.trace, o.files);
                traced = true;
            }
        }
        auto msgs = [&](TelemetryMethod t) -> std::string {
            return res.count(t) ? std::to_string(res[t].messages) : "-";
        };
        std::string ratio = "-";
        if (res.count(TelemetryMethod::Color) && res.count(TelemetryMethod::Dpt) && res[TelemetryMethod::Color].messages)
            ratio = fmt("%.6f", static_cast<double>(res[TelemetryMethod::Dpt].messages) /
                                    static_cast<double>(res[TelemetryMethod::Color].messages));
        bool exact = true;
        std::size_t blocks = 0;
        for (auto& [_, r] : res) {
            exact = exact && r.exact();
            blocks = r.blocks.size();
        }
        summary += std::to_string(m) + "," + std::to_string(tc.intervals) + "," + std::to_string(blocks) + "," +
                   msgs(TelemetryMethod::Color) + "," + msgs(TelemetryMethod::Dpt) + "," + ratio + "," +
                   (exact ? "1" : "0") + "\n";
        text << "M=" << m << ": color " << msgs(TelemetryMethod::Color) << " msgs, dpt " << msgs(TelemetryMethod::Dpt)
             << " msgs, ratio " << ratio << ", loss " << (exact ? "matches" : "DOES NOT match") << " the drop log\n";
    }
    write_file(out, "telemetry.csv", blocks_csv, o.files);
    for (auto& [m, l] : ledgers)
        write_file(out, std::string("messages_") + to_string(m) + ".csv", l, o.files);
    o.summary_csv = summary;
    o.summary = text.str();
    if (!all_exact) {
        o.exit_code = kExitInvariant;
        o.summary += "invariant violated: measured loss differs from the drop log\n";
    }
    return o;
}

RunOutcome run_updates_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out)
{
    RunOutcome o;
    const auto& app = cfg.updates;
    std::string summary =
        "switches,ingress,method,messages,installs,removes,tag_updates,audited,violations,black_holes,aborted_rounds\n";
    std::string ratios = "switches,two_phase,one_phase,ratio,expected\n";
    bool any_ratio = false;
    std::map<UpdateMethod, std::string> audits, ledgers;
    std::ostringstream text;
    std::uint64_t violations = 0;
    bool traced = false;
    for (int n : app.switches) {
        auto uc = app.base;
        uc.switches = n;
        std::map<UpdateMethod, UpdateResult> res;
        for (auto method : app.methods) {
            res[method] = run_update(uc, method, cfg.seed);
            const auto& r = res[method];
            auto& a = audits[method];
            a += prefix_csv(r.audit_csv(), "switches", std::to_string(n), a.empty());
            auto& l = ledgers[method];
            l += prefix_csv(r.trace.messages.to_csv(), "switches", std::to_string(n), l.empty());
            if (!traced) {
                write_trace(out, r.trace, o.files);
                traced = true;
            }
            std::string aborted;
            for (int x : r.aborted_rounds)
                aborted += (aborted.empty() ? "" : ";") + std::to_string(x);
            summary += std::to_string(n) + "," + std::to_string(r.ingress) + "," + to_string(method) + "," +
                       std::to_string(r.messages) + "," + std::to_string(r.installs) + "," +
                       std::to_string(r.removes) + "," + std::to_string(r.tag_updates) + "," +
                       std::to_string(r.audited) + "," + std::to_string(r.violations) + "," +
                       std::to_string(r.black_holes) + "," + (aborted.empty() ? "-" : aborted) + "\n";
            text << "N=" << n << " " << to_string(method) << ": " << r.messages << " msgs, " << r.audited
                 << " packets audited, " << r.violations << " violations";
            if (!r.aborted_rounds.empty())
                text << ", aborted rounds " << aborted;
            text << "\n";
            violations += r.violations;
        }
        if (res.count(UpdateMethod::TwoPhase) && res.count(UpdateMethod::OnePhase)) {
            any_ratio = true;
            const auto two = res[UpdateMethod::TwoPhase].messages, one = res[UpdateMethod::OnePhase].messages;
            const double expect = 2.0 * n / (2.0 * n + ingress_count(n));
            ratios += std::to_string(n) + "," + std::to_string(two) + "," + std::to_string(one) + "," +
                      fmt("%.6f", two ? static_cast<double>(one) / static_cast<double>(two) : 0.0) + "," +
                      fmt("%.6f", expect) + "\n";
        }
    }
    for (auto& [m, a] : audits)
        write_file(out, std::string("audit_") + to_string(m) + ".csv", a, o.files);
    for (auto& [m, l] : ledgers)
        write_file(out, std::string("messages_") + to_string(m) + ".csv", l, o.files);
    if (any_ratio)
        write_file(out, "ratios.csv", ratios, o.files);
    o.summary_csv = summary;
    o.summary = text.str();
    if (violations) {
        o.exit_code = kExitInvariant;
        o.summary += "invariant violated: " + std::to_string(violations) + " packets saw mixed configurations\n";
    }
    return o;
}

RunOutcome run_balance_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out)
{
    RunOutcome o;
    const auto sweep = run_balance_sweep(cfg.topology, cfg.balance, cfg.seed);
    std::string runs = "seed," + balance_csv_header() + "\n";
    std::size_t i = 0;
    for (const auto& p : sweep.points)
        for (std::size_t s = 0; s < p.goodput_bps.size(); ++s, ++i)
            runs += std::to_string(cfg.seed + s) + "," + balance_csv_row(sweep.runs[i]) + "\n";
    write_file(out, "balance.csv", runs, o.files);

    std::string summary = "mode,bit,half_period_us,computed,seeds,median_goodput_bps,utilisation\n";
    std::ostringstream text;
    text << "paths " << sweep.path_rate_bps / 1e6 << " Mb/s, computed bit " << sweep.computed_bit.str() << "\n";
    for (const auto& p : sweep.points) {
        const bool dpt = p.mode == BalanceMode::Dpt;
        const double util = sweep.path_rate_bps ? p.median_bps / static_cast<double>(sweep.path_rate_bps) : 0.0;
        summary += std::string(to_string(p.mode)) + "," + (dpt ? p.bit.str() : "-") + "," +
                   (dpt ? fmt("%.3f", toggle_half_period(p.bit).to_seconds() * 1e6) : "-") + "," +
                   (p.computed ? "1" : "0") + "," + std::to_string(p.goodput_bps.size()) + "," +
                   fmt("%.0f", p.median_bps) + "," + fmt("%.4f", util) + "\n";
        text << to_string(p.mode);
        if (dpt)
            text << " " << p.bit.str() << (p.computed ? " (computed)" : "");
        text << ": median goodput " << fmt("%.2f", p.median_bps / 1e6) << " Mb/s (" << fmt("%.1f", 100 * util)
             << "% of paths)\n";
    }
    const BalanceResult* rep = nullptr;
    i = 0;
    for (const auto& p : sweep.points) {
        if (p.mode == BalanceMode::Dpt && p.computed && !rep)
            rep = &sweep.runs[i];
        i += p.goodput_bps.size();
    }
    if (!rep && !sweep.runs.empty())
        rep = &sweep.runs.front();
    if (rep)
        write_trace(out, rep->trace, o.files);
    o.summary_csv = summary;
    o.summary = text.str();
    return o;
}

}  // namespace

std::string encode_text(const EncodeApp& e)
{
    std::ostringstream os;
    std::vector<TernaryPattern> entries;
    if (e.extremal) {
        if (e.width < 1 || e.width > 64)
            throw RangeError("width must be in 1..64");
        const int shift = 64 - e.width;
        const std::uint64_t raw = *e.extremal;
        std::uint64_t top = shift == 64 ? 0 : raw >> shift;
        const bool rounded = shift > 0 && (raw & ((std::uint64_t{1} << shift) - 1)) != 0;
        if (rounded) {
            if (e.width < 64 && top + 1 == (std::uint64_t{1} << e.width))
                throw RangeError("T0 lies beyond the last value representable in the top " + std::to_string(e.width) +
                                 " bits");
            ++top;
        }
        entries = compile_extremal(ExtremalRange{top}, e.width);
        for (auto& p : entries)
            p = TernaryPattern::make(shift == 64 ? 0 : p.value << shift, shift == 64 ? 0 : p.mask << shift);
        os << "# T >= " << seconds_text(raw) << " s over the top " << e.width << " bits";
        if (rounded)
            os << " (rounded up to " << seconds_text(top << shift) << " s)";
    } else if (e.periodic) {
        PeriodicRange r{e.periodic->slot_bits, e.bit, e.periodic->slots};
        if (e.bit.position() + r.slot_bits > 64)
            throw RangeError("slot field runs past the top of the timestamp");
        entries = compile_periodic(r, e.always);
        os << "# slots {";
        bool first = true;
        for (auto s : e.periodic->slots) {
            os << (first ? "" : ",") << s;
            first = false;
        }
        os << "} of " << r.slot_bits << " bits from " << e.bit.str();
    } else {
        throw RangeError("nothing to encode");
    }
    os << ": " << entries.size() << (entries.size() == 1 ? " entry" : " entries") << "\n";
    for (const auto& p : entries)
        os << render_ntp(p) << "\n";
    return os.str();
}

double median(std::vector<double> v)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

const BalancePoint* BalanceSweep::find(BalanceMode m, std::optional<BitIndex> bit) const
{
    for (const auto& p : points) {
        if (p.mode != m)
            continue;
        if (m != BalanceMode::Dpt)
            return &p;
        if (bit ? p.bit == *bit : p.computed)
            return &p;
    }
    return nullptr;
}

BalanceSweep run_balance_sweep(const TopologySpec& topo, const BalanceApp& app, std::uint64_t seed)
{
    BalanceSweep sweep;
    std::vector<std::pair<BalanceMode, std::optional<BitIndex>>> plan;
    for (auto m : app.modes)
        plan.push_back({m, m == BalanceMode::Dpt ? app.setup.bit : std::nullopt});
    for (auto b : app.sweep_bits)
        plan.push_back({BalanceMode::Dpt, b});

    for (const auto& [mode, bit] : plan) {
        BalancePoint p;
        p.mode = mode;
        auto setup = app.setup;
        setup.bit = bit;
        for (int s = 0; s < app.seeds; ++s) {
            auto r = run_balance(topo, setup, mode, seed + static_cast<std::uint64_t>(s));
            sweep.path_rate_bps = r.path_rate_bps;
            if (mode == BalanceMode::Dpt) {
                p.bit = r.bit;
                sweep.computed_bit = compute_toggle_interval(r.path_rate_bps, setup.mtu).bit;
            }
            p.goodput_bps.push_back(r.goodput_bps);
            sweep.runs.push_back(std::move(r));
        }
        p.median_bps = median(p.goodput_bps);
        p.computed = mode == BalanceMode::Dpt && !bit;
        sweep.points.push_back(std::move(p));
    }
    if (sweep.path_rate_bps && !std::any_of(app.modes.begin(), app.modes.end(), [](auto m) { return m == BalanceMode::Dpt; }))
        sweep.computed_bit = compute_toggle_interval(sweep.path_rate_bps, app.setup.mtu).bit;
    return sweep;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out)
{
    std::filesystem::create_directories(out);
    RunOutcome o;
    try {
        switch (cfg.kind) {
        case ExperimentKind::Telemetry:
            o = run_telemetry_experiment(cfg, out);
            break;
        case ExperimentKind::Updates:
            o = run_updates_experiment(cfg, out);
            break;
        case ExperimentKind::LoadBalance:
            o = run_balance_experiment(cfg, out);
            break;
        case ExperimentKind::Encode: {
            const auto text = encode_text(cfg.encode);
            write_file(out, "encode.txt", text, o.files);
            o.summary = text;
            o.summary_csv = "entries\n" + std::to_string(std::count(text.begin(), text.end(), '\n') - 1) + "\n";
            break;
        }
        }
    } catch (const InvariantViolation& e) {
        o.exit_code = kExitInvariant;
        o.summary += std::string("invariant violated: ") + e.what() + "\n";
        o.summary_csv = "error\n" + std::string("invariant violation") + "\n";
    }
    write_file(out, "summary.csv", o.summary_csv, o.files);
    return o;
}

}  // namespace dptnet
