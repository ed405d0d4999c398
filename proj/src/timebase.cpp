#include "dptnet/timebase.hpp"

#include "dptnet/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>

namespace dptnet {

namespace {

std::string fixed9(bool negative, std::uint64_t whole, std::uint32_t frac)
{
    const std::uint64_t nanos = (std::uint64_t{frac} * 1'000'000'000ULL) >> 32;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%llu.%09llu", negative ? "-" : "",
                  static_cast<unsigned long long>(whole), static_cast<unsigned long long>(nanos));
    return buf;
}

}  // namespace

Time Time::seconds(double s)
{
    return Time{std::llround(s * static_cast<double>(kTicksPerSecond))};
}

std::string Time::str() const
{
    const bool neg = ticks_ < 0;
    const std::uint64_t mag = neg ? static_cast<std::uint64_t>(-(ticks_ + 1)) + 1 : static_cast<std::uint64_t>(ticks_);
    return fixed9(neg, mag >> 32, static_cast<std::uint32_t>(mag));
}

long double NtpTimestamp::as_seconds() const
{
    return static_cast<long double>(sec) + std::ldexp(static_cast<long double>(frac), -32);
}

std::string NtpTimestamp::str() const
{
    return fixed9(false, sec, frac);
}

BitIndex BitIndex::sec(int index)
{
    if (index < 1 || index > 32)
        throw RangeError("Time.Sec bit index must be in 1..32, got " + std::to_string(index));
    return {TimeField::Sec, index};
}

BitIndex BitIndex::frac(int index)
{
    if (index < 1 || index > 32)
        throw RangeError("Time.Frac bit index must be in 1..32, got " + std::to_string(index));
    return {TimeField::Frac, index};
}

BitIndex BitIndex::from_position(int position)
{
    if (position < 0 || position > 63)
        throw RangeError("timestamp bit position must be in 0..63, got " + std::to_string(position));
    return position >= 32 ? sec(position - 31) : frac(position + 1);
}

BitIndex BitIndex::parse(std::string_view text)
{
    const auto colon = text.find(':');
    if (colon == std::string_view::npos)
        throw RangeError("bit index must look like SEC:<n> or FRAC:<n>, got '" + std::string(text) + "'");
    std::string field;
    for (char c : text.substr(0, colon))
        field.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    const std::string num(text.substr(colon + 1));
    int index = 0;
    try {
        std::size_t used = 0;
        index = std::stoi(num, &used);
        if (used != num.size())
            throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw RangeError("bad bit index number '" + num + "'");
    }
    if (field == "SEC")
        return sec(index);
    if (field == "FRAC")
        return frac(index);
    throw RangeError("unknown timestamp field '" + field + "'");
}

std::string BitIndex::str() const
{
    return (field == TimeField::Sec ? "SEC:" : "FRAC:") + std::to_string(index);
}

Time ClockModel::read(Time t_true) const
{
    // floor(t + offset + d*t) == t + offset + floor(d*t) since t and offset are whole ticks.
    std::int64_t skew = 0;
    if (drift_ppm != 0.0) {
        const long double d = static_cast<long double>(drift_ppm) / 1'000'000.0L;
        skew = static_cast<std::int64_t>(std::floor(d * static_cast<long double>(t_true.ticks())));
    }
    return t_true + offset + Time::from_ticks(skew);
}

NtpTimestamp now(const ClockModel& clock, Time t_true)
{
    if (t_true < Time{})
        throw ClockError("simulation time is negative: " + t_true.str());
    const Time local = clock.read(t_true);
    if (local < Time{})
        throw ClockError("clock skew made time negative at node " + std::to_string(clock.owner) +
                         " (t_true=" + t_true.str() + ", local=" + local.str() + ")");
    return NtpTimestamp::from_raw(static_cast<std::uint64_t>(local.ticks()));
}

int bit_of(NtpTimestamp ts, BitIndex b)
{
    return static_cast<int>((ts.raw() >> b.position()) & 1U);
}

Time toggle_half_period(BitIndex b)
{
    return Time::from_ticks(std::int64_t{1} << b.position());
}

}  // namespace dptnet
