#pragma once

#include "dptnet/timebase.hpp"

#include <compare>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace dptnet {

// A TCAM-style (value, mask) entry. Bits where mask is 1 must equal value;
// the others are don't-care and are kept zero in value.
struct TernaryPattern {
    std::uint64_t value = 0;
    std::uint64_t mask = 0;

    // Throws RangeError when value has bits outside mask.
    static TernaryPattern make(std::uint64_t value, std::uint64_t mask);
    static constexpr TernaryPattern wildcard() { return {}; }

    constexpr bool matches(std::uint64_t x) const { return (x & mask) == value; }
    bool matches(NtpTimestamp ts) const { return matches(ts.raw()); }
    // Every value this pattern matches is also matched by other.
    constexpr bool subsumed_by(const TernaryPattern& other) const
    {
        return (other.mask & ~mask) == 0 && (value & other.mask) == other.value;
    }
    int care_bits() const;

    friend constexpr auto operator<=>(const TernaryPattern&, const TernaryPattern&) = default;
};

// T >= t0 over width-bit values.
struct ExtremalRange {
    std::uint64_t t0 = 0;
};

// Membership is decided by a k-bit slot field whose least significant bit is
// slot_lsb; a slot therefore lasts toggle_half_period(slot_lsb).
struct PeriodicRange {
    int slot_bits = 1;
    BitIndex slot_lsb = BitIndex::frac(32);
    std::set<std::uint32_t> active_slots;

    std::uint32_t slot_index(std::uint64_t ts) const;
    bool contains(std::uint64_t ts) const { return active_slots.count(slot_index(ts)) != 0; }
    Time slot_width() const { return toggle_half_period(slot_lsb); }
    Time period() const { return slot_width() * (std::int64_t{1} << slot_bits); }
};

inline constexpr int kMaxOracleWidth = 20;
inline constexpr int kMaxSlotBits = 16;

// Dense set of width-bit values, produced by the enumeration oracle.
class ValueSet {
public:
    explicit ValueSet(int width);

    int width() const { return width_; }
    std::uint64_t universe() const { return std::uint64_t{1} << width_; }
    void insert(std::uint64_t v) { words_[v >> 6] |= std::uint64_t{1} << (v & 63); }
    void erase(std::uint64_t v) { words_[v >> 6] &= ~(std::uint64_t{1} << (v & 63)); }
    bool contains(std::uint64_t v) const { return (words_[v >> 6] >> (v & 63)) & 1U; }
    std::uint64_t size() const;
    std::vector<std::uint64_t> to_vector() const;

    friend bool operator==(const ValueSet&, const ValueSet&) = default;

private:
    int width_;
    std::vector<std::uint64_t> words_;
};

// One entry per 0-bit of t0 above its lowest set bit, plus one exact-prefix entry.
// t0 == 0 yields the single all-wildcard entry.
std::vector<TernaryPattern> compile_extremal(ExtremalRange r, int width);

// Irredundant cube cover of the active slots, positioned in the 64-bit timestamp.
// Empty active sets are rejected; a full set is rejected unless allow_always.
std::vector<TernaryPattern> compile_periodic(const PeriodicRange& r, bool allow_always = false);

// Closed window [ta, tb) as two prioritised extremal compilations: entries in
// `shadow` (T >= tb) must sit above entries in `active` (T >= ta) and fall through.
struct WindowRules {
    std::vector<TernaryPattern> shadow;
    std::vector<TernaryPattern> active;
};
WindowRules compile_window(std::uint64_t ta, std::uint64_t tb, int width);

// Enumerates the exact set of width-bit values matching any pattern. width <= 20.
ValueSet oracle_members(const std::vector<TernaryPattern>& patterns, int width);

// Greedy cube merging and subsumption removal. The matched set is unchanged
// (checked against the oracle when width <= 20); the result is not guaranteed minimal.
std::vector<TernaryPattern> minimize(const std::vector<TernaryPattern>& patterns, int width);

// Pattern as MSB-first characters over `width` bits: '0', '1' or '*'.
std::string render_bits(const TernaryPattern& p, int width);
// Two 32-character fields in the style of the NTP timestamp figure.
std::string render_ntp(const TernaryPattern& p);

}  // namespace dptnet
