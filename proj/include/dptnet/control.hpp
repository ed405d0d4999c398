#pragma once

#include "dptnet/timebase.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dptnet {

enum class MessageKind { InstallRule, RemoveRule, ReadCounters, ReadTsRegister, SetTagPolicy };

const char* to_string(MessageKind k);

// One controller->switch interaction. A batch of rules sent to one switch in
// one go is still one message.
struct LedgerEntry {
    Time sent_at{};
    Time delivered_at{};
    MessageKind kind = MessageKind::InstallRule;
    NodeId target = 0;
    std::string app;
    std::uint64_t round = 0;
    bool setup = false;  // initial provisioning, left out of load comparisons
};

// Append-only.
class MessageLedger {
public:
    void append(LedgerEntry e) { entries_.push_back(std::move(e)); }
    const std::vector<LedgerEntry>& entries() const { return entries_; }

    // Non-setup messages of one app (all apps when app is empty).
    std::uint64_t count(const std::string& app = {}) const;
    std::uint64_t count(const std::string& app, MessageKind kind) const;

    // time,app,kind,target,round,setup
    std::string to_csv() const;

private:
    std::vector<LedgerEntry> entries_;
};

}  // namespace dptnet
