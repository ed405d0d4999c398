#include <doctest.h>

#include "dptnet/error.hpp"
#include "dptnet/timebase.hpp"

#include <random>

using namespace dptnet;

TEST_CASE("now() with identity, shifted and drifting clocks")
{
    ClockModel identity;
    auto ts = now(identity, Time::seconds(1.5));
    CHECK(ts.sec == 1);
    CHECK(ts.frac == (1U << 31));

    ClockModel shifted{Time::seconds(0.25), 0.0, 1};
    ts = now(shifted, Time::seconds(1.0));
    CHECK(ts.sec == 1);
    CHECK(ts.frac == (1U << 30));

    // 10 000 s * (1 + 100e-6) = 10 000 * 1 000 100 / 1 000 000 = 10 001 s exactly.
    constexpr std::int64_t expected_sec = 10'000LL * 1'000'100LL / 1'000'000LL;
    static_assert(expected_sec == 10'001);
    ClockModel drifting{Time{}, 100.0, 2};
    ts = now(drifting, Time::from_whole_seconds(10'000));
    CHECK(ts.sec == expected_sec);
    CHECK(ts.frac == 0);
}

TEST_CASE("now() rejects negative time")
{
    ClockModel behind{Time::seconds(-2.0), 0.0, 3};
    CHECK_THROWS_AS(now(behind, Time::seconds(1.0)), ClockError);
    CHECK_NOTHROW(now(behind, Time::seconds(2.0)));
    CHECK_THROWS_AS(now(ClockModel{}, Time::seconds(-1.0)), ClockError);
}

TEST_CASE("now() truncates toward zero")
{
    // One tick is 2^-32 s; 1.5 ticks must read as 1.
    ClockModel c;
    auto a = now(c, Time::from_ticks(1));
    CHECK(a.frac == 1);
    ClockModel half_ppm{Time{}, 0.5, 0};  // adds 0.5e-6 * t
    auto b = now(half_ppm, Time::from_ticks(1'000'000 * 3));  // skew = 1.5 ticks
    CHECK(b.frac == 3'000'001);
}

TEST_CASE("bit_of and BitIndex conventions")
{
    CHECK(bit_of({1, 0}, BitIndex::sec(1)) == 1);
    CHECK(bit_of({64, 0}, BitIndex::sec(7)) == 1);
    CHECK(bit_of({63, 0}, BitIndex::sec(7)) == 0);
    CHECK(bit_of({0, 1U << 31}, BitIndex::frac(32)) == 1);
    CHECK(bit_of({0, 1U << 30}, BitIndex::frac(32)) == 0);

    CHECK(BitIndex::parse("SEC:7") == BitIndex::sec(7));
    CHECK(BitIndex::parse("frac:12") == BitIndex::frac(12));
    CHECK(BitIndex::from_position(32) == BitIndex::sec(1));
    CHECK(BitIndex::from_position(31) == BitIndex::frac(32));
    CHECK_THROWS_AS(BitIndex::sec(0), RangeError);
    CHECK_THROWS_AS(BitIndex::frac(33), RangeError);
    CHECK_THROWS_AS(BitIndex::parse("MIN:3"), RangeError);
}

TEST_CASE("toggle_half_period")
{
    // (FRAC,12): 2^11 ticks = 2^-21 s, about 0.477 us.
    CHECK(toggle_half_period(BitIndex::frac(12)).ticks() == (1LL << 11));
    CHECK(toggle_half_period(BitIndex::frac(12)).to_seconds() == doctest::Approx(0.476837e-6).epsilon(1e-5));
    CHECK(toggle_half_period(BitIndex::sec(7)) == Time::from_whole_seconds(64));
    CHECK(toggle_half_period(BitIndex::sec(1)) == Time::from_whole_seconds(1));
}

TEST_CASE("property: adding the half period flips the bit")
{
    // Exhaustive at reduced width: every 12-bit raw value and every bit below 12.
    for (std::uint64_t raw = 0; raw < (1U << 12); ++raw)
        for (int pos = 0; pos < 11; ++pos) {
            const auto b = BitIndex::from_position(pos);
            const auto ts = NtpTimestamp::from_raw(raw);
            CHECK((bit_of(ts, b) ^ bit_of(ts + toggle_half_period(b), b)) == 1);
        }

    std::mt19937_64 rng(42);
    for (int i = 0; i < 20'000; ++i) {
        const auto ts = NtpTimestamp::from_raw(rng() >> 1);
        const auto b = BitIndex::from_position(static_cast<int>(rng() % 62));
        REQUIRE((bit_of(ts, b) ^ bit_of(ts + toggle_half_period(b), b)) == 1);
    }
}

TEST_CASE("property: now() is monotone and ordering matches as_seconds")
{
    std::mt19937_64 rng(7);
    for (double drift : {-999'999.0, -50.0, 0.0, 13.7, 500'000.0}) {
        ClockModel c{Time::seconds(3.0), drift, 0};
        NtpTimestamp prev = now(c, Time{});
        Time t{};
        for (int i = 0; i < 5'000; ++i) {
            t += Time::from_ticks(static_cast<std::int64_t>(rng() % 5'000'000));
            auto cur = now(c, t);
            REQUIRE(prev <= cur);
            prev = cur;
        }
    }
    for (int i = 0; i < 20'000; ++i) {
        auto a = NtpTimestamp::from_raw(rng());
        auto b = NtpTimestamp::from_raw(i % 3 == 0 ? a.raw() + (rng() % 3) : rng());
        REQUIRE((a < b) == (a.as_seconds() < b.as_seconds()));
        REQUIRE((a == b) == (a.as_seconds() == b.as_seconds()));
    }
}

TEST_CASE("Time rendering and timestamp difference")
{
    CHECK(Time::seconds(1.5).str() == "1.500000000");
    CHECK(Time::seconds(-0.25).str() == "-0.250000000");
    NtpTimestamp a{10, 0}, b{10, 1U << 31};
    CHECK((b - a) == Time::seconds(0.5));
    CHECK((a - b) == Time::seconds(-0.5));
}
