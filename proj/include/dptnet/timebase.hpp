#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace dptnet {

using NodeId = std::uint32_t;

inline constexpr std::int64_t kTicksPerSecond = std::int64_t{1} << 32;

// Simulation time and durations, in ticks of 2^-32 s (the NTP fraction unit).
// Signed, so it doubles as a duration type.
class Time {
public:
    constexpr Time() = default;

    static constexpr Time from_ticks(std::int64_t ticks) { return Time{ticks}; }
    static constexpr Time from_whole_seconds(std::int64_t s) { return Time{s * kTicksPerSecond}; }
    // Rounds to the nearest tick.
    static Time seconds(double s);
    static Time milliseconds(double ms) { return seconds(ms * 1e-3); }
    static Time microseconds(double us) { return seconds(us * 1e-6); }

    constexpr std::int64_t ticks() const { return ticks_; }
    double to_seconds() const { return static_cast<double>(ticks_) / static_cast<double>(kTicksPerSecond); }

    // Fixed-point decimal rendering with nine fractional digits, stable across platforms.
    std::string str() const;

    constexpr Time operator+(Time o) const { return Time{ticks_ + o.ticks_}; }
    constexpr Time operator-(Time o) const { return Time{ticks_ - o.ticks_}; }
    constexpr Time operator-() const { return Time{-ticks_}; }
    constexpr Time operator*(std::int64_t k) const { return Time{ticks_ * k}; }
    constexpr Time operator/(std::int64_t k) const { return Time{ticks_ / k}; }
    constexpr Time& operator+=(Time o) { ticks_ += o.ticks_; return *this; }
    constexpr Time& operator-=(Time o) { ticks_ -= o.ticks_; return *this; }

    friend constexpr auto operator<=>(Time, Time) = default;

private:
    constexpr explicit Time(std::int64_t t) : ticks_(t) {}
    std::int64_t ticks_ = 0;
};

// 64-bit NTP-format timestamp: 32-bit whole seconds, 32-bit binary fraction.
// The epoch is simulation time zero.
struct NtpTimestamp {
    std::uint32_t sec = 0;
    std::uint32_t frac = 0;

    static constexpr NtpTimestamp from_raw(std::uint64_t raw)
    {
        return {static_cast<std::uint32_t>(raw >> 32), static_cast<std::uint32_t>(raw)};
    }
    constexpr std::uint64_t raw() const { return (std::uint64_t{sec} << 32) | frac; }

    // Exact: long double carries a 64-bit mantissa on the supported targets.
    long double as_seconds() const;

    // Raw modular addition; sec wraparound is not modelled.
    NtpTimestamp operator+(Time d) const { return from_raw(raw() + static_cast<std::uint64_t>(d.ticks())); }
    Time operator-(NtpTimestamp o) const
    {
        return Time::from_ticks(static_cast<std::int64_t>(raw() - o.raw()));
    }

    std::string str() const;

    // Member order makes this lexicographic on (sec, frac).
    friend constexpr auto operator<=>(const NtpTimestamp&, const NtpTimestamp&) = default;
};

enum class TimeField { Sec, Frac };

// A single bit of the timestamp. index is 1-based from the LSB of its 32-bit field,
// so (Sec, 7) toggles every 64 s and (Frac, 12) every 2^-21 s.
struct BitIndex {
    TimeField field = TimeField::Frac;
    int index = 1;

    static BitIndex sec(int index);
    static BitIndex frac(int index);
    // Inverse of position(); accepts 0..63.
    static BitIndex from_position(int position);
    // "SEC:7", "FRAC:12" (case-insensitive field name).
    static BitIndex parse(std::string_view text);

    // 0-based bit position within the raw 64-bit timestamp.
    constexpr int position() const { return (field == TimeField::Sec ? 32 : 0) + index - 1; }
    std::string str() const;

    friend constexpr bool operator==(const BitIndex&, const BitIndex&) = default;
};

struct ClockModel {
    Time offset{};
    double drift_ppm = 0.0;
    NodeId owner = 0;

    // t_true + offset + drift * t_true, in ticks, truncated.
    Time read(Time t_true) const;
};

// Local clock reading as a timestamp. Throws ClockError if t_true is negative
// or the skewed reading falls below zero.
NtpTimestamp now(const ClockModel& clock, Time t_true);

int bit_of(NtpTimestamp ts, BitIndex b);

Time toggle_half_period(BitIndex b);

}  // namespace dptnet
