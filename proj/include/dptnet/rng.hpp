#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dptnet {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded stream with platform-independent draws (std distributions are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(splitmix64(seed)) {}
    // Independent stream for a (seed, stream labels...) tuple.
    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> labels)
    {
        std::uint64_t s = splitmix64(seed);
        for (auto l : labels)
            s = splitmix64(s ^ splitmix64(l + 0x632be59bd9b4e019ULL));
        return Rng(s);
    }

    std::uint64_t next() { return engine_(); }
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return uniform01() < p; }
    std::uint64_t below(std::uint64_t n) { return n <= 1 ? 0 : engine_() % n; }

private:
    std::mt19937_64 engine_;
};

// FNV-1a, stable across platforms and runs.
class Fnv1a {
public:
    template <class T>
    Fnv1a& add(T v)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            h_ ^= static_cast<std::uint64_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xffU);
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace dptnet
