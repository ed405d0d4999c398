#include "dptnet/pipeline.hpp"

#include "dptnet/error.hpp"

#include <algorithm>

namespace dptnet {

std::uint64_t FlowKey::hash() const
{
    return Fnv1a{}.add(src).add(dst).add(proto).add(sport).add(dport).value();
}

Packet ingress_push(Packet pkt, const ClockModel& clock, Time t_true, std::uint32_t dpt_bytes)
{
    if (pkt.dpt)
        throw PipelineError("packet " + std::to_string(pkt.id) + " already carries a DPTH (double push)");
    pkt.dpt = now(clock, t_true);
    pkt.dpt_bytes = dpt_bytes;
    pkt.size += dpt_bytes;
    return pkt;
}

Packet egress_pop(Packet pkt)
{
    if (!pkt.dpt)
        throw PipelineError("packet " + std::to_string(pkt.id) + " has no DPTH to pop");
    pkt.dpt.reset();
    pkt.size -= pkt.dpt_bytes;
    pkt.dpt_bytes = 0;
    return pkt;
}

bool KeyMatch::matches(const Packet& p, PortId port) const
{
    return (!in_port || *in_port == port) && (!src || *src == p.key.src) && (!dst || *dst == p.key.dst) &&
        (!proto || *proto == p.key.proto) && (!sport || *sport == p.key.sport) &&
        (!dport || *dport == p.key.dport) && (!kind || *kind == p.kind);
}

std::vector<PortId> Action::output_ports() const
{
    switch (kind) {
    case ActionKind::Forward:
    case ActionKind::PopDptAndForward:
    case ActionKind::RecordTsAndForward:
        return {port};
    case ActionKind::Spray:
    case ActionKind::Hash:
        return group;
    default:
        return {};
    }
}

bool FlowRule::matches(const Packet& p, PortId in_port) const
{
    if (!key.matches(p, in_port))
        return false;
    if (ts_match && (!p.dpt || !ts_match->matches(*p.dpt)))
        return false;
    if (tag_match && p.version_tag != tag_match)
        return false;
    if (color_match && p.color != color_match)
        return false;
    return true;
}

std::uint64_t FlowTable::install(FlowRule rule)
{
    rule.id = next_id_++;
    rule.counters = {};
    const auto pos = std::upper_bound(rules_.begin(), rules_.end(), rule, [](const FlowRule& a, const FlowRule& b) {
        return a.priority > b.priority || (a.priority == b.priority && a.id < b.id);
    });
    const auto id = rule.id;
    rules_.insert(pos, std::move(rule));
    return id;
}

std::size_t FlowTable::remove_cookie(std::uint64_t cookie)
{
    return remove_if([cookie](const FlowRule& r) { return r.cookie == cookie; });
}

const FlowRule* FlowTable::lookup(const Packet& p, PortId in_port) const
{
    for (const auto& r : rules_)
        if (r.matches(p, in_port))
            return &r;
    return nullptr;
}

FlowRule* FlowTable::lookup_mut(const Packet& p, PortId in_port)
{
    for (auto& r : rules_)
        if (r.matches(p, in_port))
            return &r;
    return nullptr;
}

std::uint64_t FlowTable::counted_packets() const
{
    std::uint64_t n = 0;
    for (const auto& r : rules_)
        n += r.counters.packets;
    return n;
}

FlowRule& match(const Packet& pkt, FlowTable& table, PortId in_port)
{
    ++table.offered_;
    FlowRule* r = table.lookup_mut(pkt, in_port);
    if (!r)
        throw PipelineError("no rule matches packet " + std::to_string(pkt.id) + " (table lacks a default rule)");
    ++r->counters.packets;
    r->counters.bytes += pkt.size;
    return *r;
}

bool record_ts(const Packet& pkt, TsRegister& reg, const ClockModel& clock, Time t_true)
{
    if (!pkt.dpt)
        return false;
    const auto block = reg.block_of(*pkt.dpt);
    if (reg.valid && reg.block == block)
        return false;
    reg.last_dpth = *pkt.dpt;
    reg.local_time = now(clock, t_true);
    reg.block = block;
    reg.valid = true;
    return true;
}

Switch::Switch(NodeId id, std::string name, ClockModel clock, std::uint64_t seed)
    : id_(id), name_(std::move(name)), clock_(clock), rng_(Rng::derive(seed, {0x5717c4ULL, id}))
{
    clock_.owner = id;
}

void Switch::set_edge_port(PortId port, bool push_dpt)
{
    edge_[port] = push_dpt;
}

void Switch::set_color_policy(std::optional<std::uint8_t> color)
{
    if (color != color_policy_)
        ++color_block_;
    color_policy_ = color;
}

TsRegister& Switch::add_register(RegisterId id, BitIndex block_lsb)
{
    TsRegister r;
    r.id = id;
    r.block_lsb = block_lsb;
    return registers_[id] = r;
}

TsRegister& Switch::reg(RegisterId id)
{
    auto it = registers_.find(id);
    if (it == registers_.end())
        throw PipelineError("switch " + name_ + " has no register " + std::to_string(id));
    return it->second;
}

Verdict Switch::process(Packet& pkt, PortId in_port, Time t_true)
{
    ++pkt.hops;
    if (auto e = edge_.find(in_port); e != edge_.end()) {
        if (e->second && !pkt.dpt)
            pkt = ingress_push(std::move(pkt), clock_, t_true, dpt_bytes_);
        if (version_policy_ && !pkt.version_tag)
            pkt.version_tag = version_policy_;
        if (color_policy_) {
            pkt.color = color_policy_;
            pkt.color_block = color_block_;
        }
    }

    FlowRule* rule = &match(pkt, table_, in_port);
    if (rule->action.kind == ActionKind::PushDpt) {
        pkt = ingress_push(std::move(pkt), clock_, t_true, dpt_bytes_);
        rule = &match(pkt, table_, in_port);
        if (rule->action.kind == ActionKind::PushDpt)
            throw PipelineError("PUSH_DPT resubmission matched PUSH_DPT again on " + name_);
    }

    if (audit_epochs_) {
        if (!rule->epoch_tag)
            pkt.trail.untagged = true;
        else if (!pkt.trail.epoch)
            pkt.trail.epoch = rule->epoch_tag;
        else if (*pkt.trail.epoch != *rule->epoch_tag)
            pkt.trail.mixed = true;
    }

    Verdict v{false, 0, rule};
    const Action& a = rule->action;
    if (a.record && a.kind != ActionKind::Drop)
        record_ts(pkt, reg(*a.record), clock_, t_true);
    switch (a.kind) {
    case ActionKind::Drop:
    case ActionKind::PushDpt:
        return v;
    case ActionKind::Forward:
        v.port = a.port;
        break;
    case ActionKind::PopDptAndForward:
        pkt = egress_pop(std::move(pkt));
        v.port = a.port;
        break;
    case ActionKind::RecordTsAndForward:
        record_ts(pkt, reg(a.reg), clock_, t_true);
        v.port = a.port;
        break;
    case ActionKind::Spray:
        if (a.group.empty())
            return v;
        v.port = a.group[rng_.below(a.group.size())];
        break;
    case ActionKind::Hash:
        if (a.group.empty())
            return v;
        v.port = a.group[pkt.key.hash() % a.group.size()];
        break;
    }
    v.forward = true;

    if (is_edge(v.port)) {
        pkt.version_tag.reset();
        pkt.color.reset();
        if (pkt.dpt)
            ++dpt_leaks_;
    }
    return v;
}

}  // namespace dptnet
