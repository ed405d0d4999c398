#include "dptnet/control.hpp"

#include <sstream>

namespace dptnet {

const char* to_string(MessageKind k)
{
    switch (k) {
    case MessageKind::InstallRule:
        return "INSTALL_RULE";
    case MessageKind::RemoveRule:
        return "REMOVE_RULE";
    case MessageKind::ReadCounters:
        return "READ_COUNTERS";
    case MessageKind::ReadTsRegister:
        return "READ_TS_REGISTER";
    case MessageKind::SetTagPolicy:
        return "SET_TAG_POLICY";
    }
    return "?";
}

std::uint64_t MessageLedger::count(const std::string& app) const
{
    std::uint64_t n = 0;
    for (const auto& e : entries_)
        n += (!e.setup && (app.empty() || e.app == app)) ? 1 : 0;
    return n;
}

std::uint64_t MessageLedger::count(const std::string& app, MessageKind kind) const
{
    std::uint64_t n = 0;
    for (const auto& e : entries_)
        n += (!e.setup && e.kind == kind && (app.empty() || e.app == app)) ? 1 : 0;
    return n;
}

std::string MessageLedger::to_csv() const
{
    std::ostringstream os;
    os << "time,app,kind,target,round,setup\n";
    for (const auto& e : entries_)
        os << e.sent_at.str() << ',' << e.app << ',' << to_string(e.kind) << ',' << e.target << ',' << e.round << ','
           << (e.setup ? 1 : 0) << '\n';
    return os.str();
}

}  // namespace dptnet
