#include "dptnet/config.hpp"

#include "dptnet/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>

namespace dptnet {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool valid_ident(std::string_view s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

// Splits "123.5ms" into number and suffix.
std::optional<std::pair<double, std::string>> number_and_unit(std::string_view s)
{
    s = trim(s);
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '-' || s[i] == '+'))
        ++i;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == 'e' ||
                            ((s[i] == '-' || s[i] == '+') && i > 0 && s[i - 1] == 'e')))
        ++i;
    auto num = parse_double(s.substr(0, i));
    if (!num)
        return std::nullopt;
    return std::make_pair(*num, lower(trim(s.substr(i))));
}

}  // namespace

std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    if (s.empty())
        return std::nullopt;
    try {
        std::size_t used = 0;
        const std::string str(s);
        const double v = std::stod(str, &used);
        if (used != str.size() || !std::isfinite(v))
            return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<std::uint64_t> parse_uint(std::string_view s)
{
    s = trim(s);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(std::string_view s)
{
    const auto v = lower(trim(s));
    if (v == "true" || v == "yes" || v == "on" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "off" || v == "0")
        return false;
    return std::nullopt;
}

std::optional<Time> parse_duration(std::string_view s)
{
    auto nu = number_and_unit(s);
    if (!nu)
        return std::nullopt;
    const auto& [n, unit] = *nu;
    double scale = 0;
    if (unit.empty() || unit == "s")
        scale = 1;
    else if (unit == "ms")
        scale = 1e-3;
    else if (unit == "us")
        scale = 1e-6;
    else if (unit == "ns")
        scale = 1e-9;
    else
        return std::nullopt;
    const double secs = n * scale;
    if (std::abs(secs) > 4e9)
        return std::nullopt;
    return Time::seconds(secs);
}

std::optional<std::uint64_t> parse_rate(std::string_view s)
{
    auto nu = number_and_unit(s);
    if (!nu || nu->first < 0)
        return std::nullopt;
    std::string unit = nu->second;
    if (unit.size() > 3 && unit.substr(unit.size() - 3) == "bps")
        unit.resize(unit.size() - 3);
    else if (unit == "bps")
        unit.clear();
    double scale = 0;
    if (unit.empty())
        scale = 1;
    else if (unit == "k")
        scale = 1e3;
    else if (unit == "m")
        scale = 1e6;
    else if (unit == "g")
        scale = 1e9;
    else
        return std::nullopt;
    const double v = std::round(nu->first * scale);
    if (v < 1 || v > 1e15)
        return std::nullopt;
    return static_cast<std::uint64_t>(v);
}

std::optional<std::uint64_t> parse_ntp_seconds(std::string_view s)
{
    s = trim(s);
    const auto dot = s.find('.');
    auto whole = parse_uint(s.substr(0, dot));
    if (!whole || *whole > 0xffffffffULL)
        return std::nullopt;
    std::uint64_t frac = 0;
    if (dot != std::string_view::npos) {
        const auto digits = s.substr(dot + 1);
        if (digits.empty() || digits.size() > 19)
            return std::nullopt;
        auto num = parse_uint(digits);
        if (!num)
            return std::nullopt;
        unsigned __int128 den = 1;
        for (std::size_t i = 0; i < digits.size(); ++i)
            den *= 10;
        // Nearest 2^-32 step.
        const unsigned __int128 scaled = ((static_cast<unsigned __int128>(*num) << 33) + den) / (2 * den);
        if (scaled >> 32) {
            if (*whole == 0xffffffffULL)
                return std::nullopt;
            return ((*whole + 1) << 32);
        }
        frac = static_cast<std::uint64_t>(scaled);
    }
    return (*whole << 32) | frac;
}

std::vector<std::string> split_list(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        const auto item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        out.emplace_back(item);
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

const char* to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::Telemetry:
        return "telemetry";
    case ExperimentKind::Updates:
        return "updates";
    case ExperimentKind::LoadBalance:
        return "loadbalance";
    case ExperimentKind::Encode:
        return "encode";
    }
    return "?";
}

RawConfig parse_raw(std::string_view text)
{
    RawConfig raw;
    std::vector<ConfigDiagnostic> diags;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                diags.push_back({line_no, "unterminated section header"});
                continue;
            }
            const auto name = lower(trim(line.substr(1, line.size() - 2)));
            if (!valid_ident(name))
                diags.push_back({line_no, "bad section name '" + name + "'"});
            raw.sections.push_back({name, line_no, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            diags.push_back({line_no, "expected key = value"});
            continue;
        }
        const auto key = lower(trim(line.substr(0, eq)));
        const auto value = std::string(trim(line.substr(eq + 1)));
        if (!valid_ident(key)) {
            diags.push_back({line_no, "bad key '" + key + "'"});
            continue;
        }
        if (raw.sections.empty()) {
            diags.push_back({line_no, "key '" + key + "' outside any section"});
            continue;
        }
        auto& entries = raw.sections.back().entries;
        if (std::any_of(entries.begin(), entries.end(), [&](const RawEntry& e) { return e.key == key; })) {
            diags.push_back({line_no, "duplicate key '" + key + "' in [" + raw.sections.back().name + "]"});
            continue;
        }
        entries.push_back({key, value, line_no});
    }
    if (!diags.empty())
        throw ConfigError(std::move(diags));
    return raw;
}

void apply_override(RawConfig& raw, const std::string& path, const std::string& value)
{
    const auto dot = path.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
        throw ConfigError({{0, "parameter '" + path + "' must look like section.key or section#i.key"}});
    std::string section = lower(path.substr(0, dot));
    const std::string key = lower(path.substr(dot + 1));
    std::optional<std::size_t> index;
    if (const auto h = section.find('#'); h != std::string::npos) {
        auto i = parse_uint(section.substr(h + 1));
        if (!i || *i == 0)
            throw ConfigError({{0, "bad section index in '" + path + "'"}});
        index = *i;
        section.resize(h);
    }
    std::size_t seen = 0;
    bool hit = false;
    for (auto& s : raw.sections) {
        if (s.name != section)
            continue;
        ++seen;
        if (index && seen != *index)
            continue;
        hit = true;
        auto it = std::find_if(s.entries.begin(), s.entries.end(), [&](const RawEntry& e) { return e.key == key; });
        if (it != s.entries.end())
            it->value = value;
        else
            s.entries.push_back({key, value, s.line});
    }
    if (!hit)
        throw ConfigError({{0, "parameter '" + path + "' names no section in the config"}});
}

namespace {

using Handler = std::function<void(const RawEntry&)>;

class Validator {
public:
    std::vector<ConfigDiagnostic> diags;

    void err(int line, std::string msg) { diags.push_back({line, std::move(msg)}); }

    // Runs handlers for every entry; reports unknown keys and missing required ones.
    void walk(const RawSection& s, const std::map<std::string, Handler>& handlers,
              std::initializer_list<const char*> required = {})
    {
        for (const auto& e : s.entries) {
            auto h = handlers.find(e.key);
            if (h == handlers.end())
                err(e.line, "unknown key '" + e.key + "' in [" + s.name + "]");
            else
                h->second(e);
        }
        for (const char* r : required)
            if (std::none_of(s.entries.begin(), s.entries.end(), [&](const RawEntry& e) { return e.key == r; }))
                err(s.line, "[" + s.name + "] is missing '" + r + "'");
    }

    template <class T, class Parser>
    Handler set(T& out, Parser parser, const char* what)
    {
        return [this, &out, parser, what](const RawEntry& e) {
            auto v = parser(e.value);
            if (!v)
                err(e.line, "'" + e.key + "' expects " + what + ", got '" + e.value + "'");
            else
                out = static_cast<T>(*v);
        };
    }

    Handler duration(Time& out) { return set(out, parse_duration, "a duration such as 10ms"); }
    Handler opt_duration(std::optional<Time>& out) { return set(out, parse_duration, "a duration such as 10ms"); }
    Handler rate(std::uint64_t& out) { return set(out, parse_rate, "a rate such as 10Mbps"); }
    Handler text(std::string& out)
    {
        return [&out](const RawEntry& e) { out = e.value; };
    }
    template <class T>
    Handler count(T& out, std::uint64_t lo, std::uint64_t hi)
    {
        return [this, &out, lo, hi](const RawEntry& e) {
            auto v = parse_uint(e.value);
            if (!v || *v < lo || *v > hi)
                err(e.line, "'" + e.key + "' expects an integer in [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "], got '" + e.value + "'");
            else
                out = static_cast<T>(*v);
        };
    }
    Handler probability(double& out)
    {
        return [this, &out](const RawEntry& e) {
            auto v = parse_double(e.value);
            if (!v || *v < 0 || *v > 1)
                err(e.line, "'" + e.key + "' expects a probability in [0, 1], got '" + e.value + "'");
            else
                out = *v;
        };
    }
    Handler real(double& out) { return set(out, parse_double, "a number"); }
    Handler flag(bool& out) { return set(out, parse_bool, "true or false"); }
    Handler bit(BitIndex& out)
    {
        return [this, &out](const RawEntry& e) {
            try {
                out = BitIndex::parse(e.value);
            } catch (const Error& ex) {
                err(e.line, "'" + e.key + "': " + ex.what());
            }
        };
    }
    Handler int_list(std::vector<int>& out, int lo, int hi)
    {
        return [this, &out, lo, hi](const RawEntry& e) {
            out.clear();
            for (const auto& item : split_list(e.value)) {
                auto v = parse_uint(item);
                if (!v || *v < static_cast<std::uint64_t>(lo) || *v > static_cast<std::uint64_t>(hi)) {
                    err(e.line, "'" + e.key + "' expects integers in [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + "], got '" + item + "'");
                    return;
                }
                out.push_back(static_cast<int>(*v));
            }
        };
    }
    template <class T>
    Handler choices(std::vector<T>& out, std::vector<std::pair<std::string, T>> names)
    {
        return [this, &out, names](const RawEntry& e) {
            out.clear();
            for (const auto& item : split_list(e.value)) {
                const auto want = lower(item);
                auto it = std::find_if(names.begin(), names.end(), [&](const auto& n) { return n.first == want; });
                if (it == names.end()) {
                    std::string all;
                    for (const auto& n : names)
                        all += (all.empty() ? "" : ", ") + n.first;
                    err(e.line, "'" + e.key + "': unknown choice '" + item + "' (one of " + all + ")");
                    return;
                }
                if (std::find(out.begin(), out.end(), it->second) == out.end())
                    out.push_back(it->second);
            }
        };
    }
};

struct Endpoint {
    std::string node;
    std::optional<PortId> port;
};

std::optional<Endpoint> parse_endpoint(std::string_view s)
{
    s = trim(s);
    Endpoint ep;
    const auto colon = s.find(':');
    ep.node = std::string(trim(s.substr(0, colon)));
    if (!valid_ident(ep.node))
        return std::nullopt;
    if (colon != std::string_view::npos) {
        auto p = parse_uint(s.substr(colon + 1));
        if (!p || *p == 0 || *p > 65535)
            return std::nullopt;
        ep.port = static_cast<PortId>(*p);
    }
    return ep;
}

bool is_topology_section(const std::string& n)
{
    return n == "node" || n == "link";
}

}  // namespace

ExperimentConfig validate_config(const RawConfig& raw)
{
    Validator v;
    ExperimentConfig cfg;

    const RawSection* exp = nullptr;
    const RawSection* app = nullptr;
    for (const auto& s : raw.sections) {
        if (s.name == "experiment" || s.name == "app") {
            const RawSection*& slot = s.name == "experiment" ? exp : app;
            if (slot)
                v.err(s.line, "only one [" + s.name + "] section is allowed");
            else
                slot = &s;
        } else if (!is_topology_section(s.name) && s.name != "flow") {
            v.err(s.line, "unknown section [" + s.name + "]");
        }
    }
    if (!exp)
        v.err(0, "missing [experiment] section");

    bool kind_ok = false;
    std::optional<Time> duration;
    if (exp) {
        std::string kind;
        v.walk(*exp,
               {{"kind", v.text(kind)},
                {"seed", v.count(cfg.seed, 0, UINT64_MAX)},
                {"duration", v.opt_duration(duration)}},
               {"kind"});
        const auto k = lower(kind);
        kind_ok = true;
        if (k == "telemetry")
            cfg.kind = ExperimentKind::Telemetry;
        else if (k == "updates")
            cfg.kind = ExperimentKind::Updates;
        else if (k == "loadbalance")
            cfg.kind = ExperimentKind::LoadBalance;
        else if (k == "encode")
            cfg.kind = ExperimentKind::Encode;
        else {
            kind_ok = false;
            if (!kind.empty())
                for (const auto& e : exp->entries)
                    if (e.key == "kind")
                        v.err(e.line, "unknown experiment kind '" + kind +
                                          "' (one of telemetry, updates, loadbalance, encode)");
        }
        if (duration && *duration <= Time{})
            v.err(exp->line, "duration must be positive");
    }

    // Topology.
    std::map<std::string, NodeSpec> nodes;
    std::map<std::string, int> link_count;
    for (const auto& s : raw.sections) {
        if (s.name == "node") {
            NodeSpec n;
            std::string type = "switch";
            v.walk(s,
                   {{"name", v.text(n.name)},
                    {"type", v.text(type)},
                    {"clock_offset", v.duration(n.clock_offset)},
                    {"drift_ppm", v.real(n.drift_ppm)}},
                   {"name"});
            type = lower(type);
            if (type != "switch" && type != "host")
                v.err(s.line, "node type must be switch or host, got '" + type + "'");
            n.is_switch = type != "host";
            if (n.name.empty())
                continue;
            if (!valid_ident(n.name))
                v.err(s.line, "bad node name '" + n.name + "'");
            else if (nodes.count(n.name))
                v.err(s.line, "node '" + n.name + "' defined twice");
            else {
                nodes[n.name] = n;
                cfg.topology.nodes.push_back(n);
            }
        }
    }
    for (const auto& s : raw.sections) {
        if (s.name != "link")
            continue;
        NamedLink l;
        std::optional<Endpoint> a, b;
        std::uint64_t queue = l.spec.queue_cap;
        auto endpoint = [&](std::optional<Endpoint>& out) {
            return [&v, &out, &nodes](const RawEntry& e) {
                out = parse_endpoint(e.value);
                if (!out)
                    v.err(e.line, "'" + e.key + "' expects node or node:port, got '" + e.value + "'");
                else if (!nodes.count(out->node))
                    v.err(e.line, "link endpoint '" + out->node + "' is not a defined node");
            };
        };
        v.walk(s,
               {{"a", endpoint(a)},
                {"b", endpoint(b)},
                {"rate", v.rate(l.spec.rate_bps)},
                {"delay", v.duration(l.spec.delay)},
                {"queue", v.count(queue, 1, 1'000'000)},
                {"loss", v.probability(l.spec.loss)},
                {"jitter", v.duration(l.spec.jitter)}},
               {"a", "b"});
        l.spec.queue_cap = static_cast<std::uint32_t>(queue);
        if (l.spec.delay < Time{} || l.spec.jitter < Time{})
            v.err(s.line, "link delay and jitter must not be negative");
        if (!a || !b || !nodes.count(a->node) || !nodes.count(b->node))
            continue;
        if (a->node == b->node) {
            v.err(s.line, "link from " + a->node + " to itself");
            continue;
        }
        for (const auto* ep : {&*a, &*b})
            if (!nodes[ep->node].is_switch && ++link_count[ep->node] > 1)
                v.err(s.line, "host " + ep->node + " has more than one link");
        l.a = a->node;
        l.b = b->node;
        l.spec.a_port = a->port;
        l.spec.b_port = b->port;
        cfg.topology.links.push_back(l);
    }

    // Flows.
    for (const auto& s : raw.sections) {
        if (s.name != "flow")
            continue;
        FlowConfig f;
        f.line = s.line;
        v.walk(s,
               {{"kind", v.text(f.kind)},
                {"src", v.text(f.src)},
                {"dst", v.text(f.dst)},
                {"rate", v.rate(f.rate_bps)},
                {"mtu", v.count(f.mtu, 64, 65'535)},
                {"count", v.count(f.count, 1, 64)}});
        f.kind = lower(f.kind);
        if (f.kind != "aimd" && f.kind != "cbr")
            v.err(s.line, "flow kind must be aimd or cbr, got '" + f.kind + "'");
        for (const auto* end : {&f.src, &f.dst})
            if (!end->empty() && !nodes.count(*end))
                v.err(s.line, "flow endpoint '" + *end + "' is not a defined node");
        cfg.flows.push_back(f);
    }

    if (!kind_ok) {
        if (v.diags.empty())
            v.err(0, "no experiment kind");
        throw ConfigError(std::move(v.diags));
    }

    static const RawSection empty_app{"app", 0, {}};
    const RawSection& a = app ? *app : empty_app;
    auto reject_topology = [&](const char* why, bool flows_too) {
        for (const auto& s : raw.sections)
            if (is_topology_section(s.name) || (flows_too && s.name == "flow"))
                v.err(s.line, std::string("[") + s.name + "] is not used by " + to_string(cfg.kind) + ": " + why);
    };

    switch (cfg.kind) {
    case ExperimentKind::Telemetry: {
        auto& t = cfg.telemetry;
        std::optional<int> intervals;
        int iv = t.base.intervals;
        v.walk(a, {{"pairs", v.int_list(t.pairs, 1, 4096)},
                   {"methods", v.choices(t.methods, std::vector<std::pair<std::string, TelemetryMethod>>{
                                                        {"color", TelemetryMethod::Color},
                                                        {"dpt", TelemetryMethod::Dpt}})},
                   {"intervals",
                    [&](const RawEntry& e) {
                        v.count(iv, 3, 100'000)(e);
                        intervals = iv;
                    }},
                   {"block_bit", v.bit(t.base.block_bit)},
                   {"measure_delay", v.flag(t.base.measure_delay)},
                   {"reverse_rate", v.rate(t.base.reverse_rate)},
                   {"base_offset", v.duration(t.base.base_offset)},
                   {"read_phase", v.probability(t.base.read_phase)},
                   {"control_delay", v.duration(t.base.control_delay)}});
        t.base.intervals = iv;
        if (duration) {
            if (intervals)
                v.err(a.line, "give either [experiment] duration or [app] intervals, not both");
            const auto block = toggle_half_period(t.base.block_bit).ticks();
            const auto n = duration->ticks() / block;
            if (n < 3)
                v.err(exp->line, "telemetry needs a duration of at least three blocks");
            t.base.intervals = static_cast<int>(std::min<std::int64_t>(n, 100'000));
        }
        if (t.pairs.empty() || t.methods.empty())
            v.err(a.line, "telemetry needs at least one pair count and one method");

        // Optional pair template: S1 - S2 core plus host access links.
        const TopologySpec& topo = cfg.topology;
        std::vector<const NamedLink*> core;
        for (const auto& l : topo.links) {
            const bool sa = nodes[l.a].is_switch, sb = nodes[l.b].is_switch;
            if (sa && sb)
                core.push_back(&l);
            else
                t.base.access_rate = l.spec.rate_bps;
        }
        if (!topo.links.empty() && core.size() != 1)
            v.err(0, "telemetry topology needs exactly one switch-to-switch link, found " +
                         std::to_string(core.size()));
        if (core.size() == 1) {
            const auto& c = *core.front();
            t.base.core_rate = c.spec.rate_bps;
            t.base.link_delay = c.spec.delay;
            t.base.queue_cap = c.spec.queue_cap;
            t.base.loss = c.spec.loss;
            t.base.sender_offset = nodes[c.a].clock_offset;
            t.base.receiver_offset = nodes[c.b].clock_offset;
        }
        for (const auto& n : topo.nodes)
            if (n.drift_ppm != 0)
                v.err(0, "node " + n.name + ": telemetry runs do not model clock drift");
        if (cfg.flows.size() > 1)
            v.err(cfg.flows[1].line, "telemetry takes one [flow] template");
        if (!cfg.flows.empty()) {
            const auto& f = cfg.flows.front();
            if (f.kind != "cbr")
                v.err(f.line, "telemetry flows are cbr");
            if (f.rate_bps)
                t.base.flow_rate = f.rate_bps;
            t.base.packet_size = f.mtu;
        }
        break;
    }
    case ExperimentKind::Updates: {
        auto& u = cfg.updates;
        std::uint64_t queue = u.base.queue_cap;
        v.walk(a, {{"switches", v.int_list(u.switches, 1, 512)},
                   {"methods", v.choices(u.methods, std::vector<std::pair<std::string, UpdateMethod>>{
                                                        {"two_phase", UpdateMethod::TwoPhase},
                                                        {"one_phase", UpdateMethod::OnePhase},
                                                        {"periodic", UpdateMethod::Periodic}})},
                   {"rounds", v.count(u.base.rounds, 1, 10'000)},
                   {"round_period", v.duration(u.base.round_period)},
                   {"control_delay", v.duration(u.base.control_delay)},
                   {"max_offset", v.duration(u.base.max_offset)},
                   {"margin", v.duration(u.base.margin)},
                   {"drain", v.opt_duration(u.base.drain)},
                   {"link_rate", v.rate(u.base.link_rate)},
                   {"link_delay", v.duration(u.base.link_delay)},
                   {"queue", v.count(queue, 1, 1'000'000)},
                   {"flow_rate", v.rate(u.base.flow_rate)},
                   {"packet_size", v.count(u.base.packet_size, 64, 65'535)},
                   {"round_bit", v.bit(u.base.round_bit)},
                   {"path_shift", v.count(u.base.path_shift, 0, 1'000)},
                   {"base_offset", v.duration(u.base.base_offset)}});
        u.base.queue_cap = static_cast<std::uint32_t>(queue);
        if (duration)
            v.err(exp->line, "updates runs are sized by [app] rounds, not duration");
        if (u.switches.empty() || u.methods.empty())
            v.err(a.line, "updates needs at least one switch count and one method");
        reject_topology("the leaf-spine fabric is generated from [app] switches", false);
        if (cfg.flows.size() > 1)
            v.err(cfg.flows[1].line, "updates takes one [flow] template");
        if (!cfg.flows.empty()) {
            const auto& f = cfg.flows.front();
            if (f.kind != "cbr")
                v.err(f.line, "updates flows are cbr");
            if (!f.src.empty() || !f.dst.empty())
                v.err(f.line, "updates places one flow per leaf; src and dst are not used");
            if (f.rate_bps)
                u.base.flow_rate = f.rate_bps;
            u.base.packet_size = f.mtu;
        }
        break;
    }
    case ExperimentKind::LoadBalance: {
        auto& b = cfg.balance;
        std::vector<std::uint32_t> weights;
        v.walk(a, {{"methods", v.choices(b.modes, std::vector<std::pair<std::string, BalanceMode>>{
                                                      {"dpt", BalanceMode::Dpt},
                                                      {"rps", BalanceMode::Rps},
                                                      {"ecmp", BalanceMode::Ecmp}})},
                   {"balancer", v.text(b.setup.balancer)},
                   {"seeds", v.count(b.seeds, 1, 10'000)},
                   {"min_rto", v.duration(b.setup.min_rto)},
                   {"weights",
                    [&](const RawEntry& e) {
                        for (const auto& item : split_list(e.value)) {
                            auto w = parse_uint(item);
                            if (!w || *w > 65'536) {
                                v.err(e.line, "'weights' expects small integers, got '" + item + "'");
                                return;
                            }
                            weights.push_back(static_cast<std::uint32_t>(*w));
                        }
                    }},
                   {"bit",
                    [&](const RawEntry& e) {
                        BitIndex one;
                        v.bit(one)(e);
                        b.setup.bit = one;
                    }},
                   {"bits", [&](const RawEntry& e) {
                        // FRAC:14, FRAC:16..FRAC:20
                        for (const auto& item : split_list(e.value)) {
                            try {
                                const auto dots = item.find("..");
                                if (dots == std::string::npos) {
                                    b.sweep_bits.push_back(BitIndex::parse(item));
                                    continue;
                                }
                                const auto lo = BitIndex::parse(trim(std::string_view(item).substr(0, dots)));
                                const auto hi = BitIndex::parse(trim(std::string_view(item).substr(dots + 2)));
                                if (hi.position() < lo.position())
                                    throw RangeError("empty bit range '" + item + "'");
                                for (int p = lo.position(); p <= hi.position(); ++p)
                                    b.sweep_bits.push_back(BitIndex::from_position(p));
                            } catch (const Error& ex) {
                                v.err(e.line, std::string("'bits': ") + ex.what());
                                return;
                            }
                        }
                    }}});
        b.setup.weights = weights;
        if (duration)
            b.setup.duration = *duration;
        if (b.modes.empty())
            v.err(a.line, "loadbalance needs at least one method");
        if (cfg.topology.nodes.empty() || cfg.topology.links.empty())
            v.err(exp ? exp->line : 0, "loadbalance needs [node] and [link] sections");
        if (!nodes.empty()) {
            auto it = nodes.find(b.setup.balancer);
            if (it == nodes.end())
                v.err(a.line, "balancer '" + b.setup.balancer + "' is not a defined node");
            else if (!it->second.is_switch)
                v.err(a.line, "balancer '" + b.setup.balancer + "' is a host");
        }
        if (cfg.flows.size() != 1) {
            v.err(cfg.flows.empty() ? (exp ? exp->line : 0) : cfg.flows[1].line,
                  "loadbalance takes exactly one [flow] (use count for parallel flows)");
        } else {
            const auto& f = cfg.flows.front();
            if (f.kind != "aimd")
                v.err(f.line, "loadbalance flows are aimd");
            if (f.src.empty() || f.dst.empty())
                v.err(f.line, "[flow] needs src and dst");
            for (const auto* end : {&f.src, &f.dst})
                if (nodes.count(*end) && nodes[*end].is_switch)
                    v.err(f.line, "flow endpoint '" + *end + "' is a switch");
            b.setup.src = f.src;
            b.setup.dst = f.dst;
            b.setup.mtu = f.mtu;
            b.setup.flows = f.count;
        }
        break;
    }
    case ExperimentKind::Encode: {
        auto& en = cfg.encode;
        v.walk(a, {{"extremal",
                    [&](const RawEntry& e) {
                        en.extremal = parse_ntp_seconds(e.value);
                        if (!en.extremal)
                            v.err(e.line, "'extremal' expects seconds such as 1073741824 or 0.5, got '" + e.value + "'");
                    }},
                   {"periodic",
                    [&](const RawEntry& e) {
                        // k:slot,slot,...
                        const auto colon = e.value.find(':');
                        auto k = parse_uint(std::string_view(e.value).substr(0, colon));
                        if (colon == std::string::npos || !k || *k < 1 || *k > static_cast<unsigned>(kMaxSlotBits)) {
                            v.err(e.line, "'periodic' expects k:slots with 1 <= k <= " + std::to_string(kMaxSlotBits));
                            return;
                        }
                        PeriodicSpec p;
                        p.slot_bits = static_cast<int>(*k);
                        for (const auto& item : split_list(std::string_view(e.value).substr(colon + 1))) {
                            auto s = parse_uint(item);
                            if (!s || *s >= (std::uint64_t{1} << *k)) {
                                v.err(e.line, "slot '" + item + "' is outside 0.." +
                                                  std::to_string((std::uint64_t{1} << *k) - 1));
                                return;
                            }
                            p.slots.insert(static_cast<std::uint32_t>(*s));
                        }
                        en.periodic = p;
                    }},
                   {"width", v.count(en.width, 1, 64)},
                   {"bit", v.bit(en.bit)},
                   {"always", v.flag(en.always)}});
        if (en.extremal.has_value() == en.periodic.has_value())
            v.err(a.line, "encode needs exactly one of extremal or periodic");
        if (duration)
            v.err(exp->line, "encode takes no duration");
        reject_topology("encode only compiles ranges", true);
        break;
    }
    }

    if (!v.diags.empty()) {
        std::stable_sort(v.diags.begin(), v.diags.end(),
                         [](const ConfigDiagnostic& x, const ConfigDiagnostic& y) { return x.line < y.line; });
        throw ConfigError(std::move(v.diags));
    }
    return cfg;
}

ExperimentConfig parse_config(std::string_view text)
{
    return validate_config(parse_raw(text));
}

}  // namespace dptnet
