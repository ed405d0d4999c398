#include "dptnet/trange.hpp"

#include "dptnet/error.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <tuple>

namespace dptnet {

namespace {

constexpr std::uint64_t low_mask(int width)
{
    return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

void check_width(int width, int max)
{
    if (width < 1 || width > max)
        throw RangeError("width must be in 1.." + std::to_string(max) + ", got " + std::to_string(width));
}

// Quine-McCluskey prime implicants of `on` over a k-bit space. Cubes are
// grouped by mask; within a group a dense table over k-bit values finds partners.
std::vector<TernaryPattern> prime_implicants(const std::vector<std::uint32_t>& on, int k)
{
    const std::uint64_t full = low_mask(k);
    std::map<std::uint64_t, std::vector<std::uint64_t>> current;
    current[full].assign(on.begin(), on.end());

    std::vector<char> state(std::size_t{1} << k, 0);  // 1 present, 2 merged
    std::vector<TernaryPattern> primes;
    while (!current.empty()) {
        std::map<std::uint64_t, std::vector<std::uint64_t>> next;
        std::vector<TernaryPattern> level;
        for (auto& [mask, values] : current) {
            std::sort(values.begin(), values.end());
            values.erase(std::unique(values.begin(), values.end()), values.end());
            for (auto v : values)
                state[v] = 1;
            for (auto v : values) {
                for (int b = 0; b < k; ++b) {
                    const std::uint64_t bit = std::uint64_t{1} << b;
                    if (!(mask & bit) || (v & bit) || !state[v | bit])
                        continue;
                    next[mask & ~bit].push_back(v);
                    state[v] = 2;
                    state[v | bit] = 2;
                }
            }
            for (auto v : values) {
                if (state[v] == 1)
                    level.push_back({v, mask});
                state[v] = 0;
            }
        }
        std::sort(level.begin(), level.end());
        primes.insert(primes.end(), level.begin(), level.end());
        current = std::move(next);
    }
    return primes;
}

template <class F>
void for_each_member(const TernaryPattern& p, std::uint64_t universe_mask, F&& f)
{
    if (p.value & ~universe_mask)
        return;
    const std::uint64_t free = ~p.mask & universe_mask;
    std::uint64_t sub = 0;
    do {
        f(p.value | sub);
        sub = (sub - free) & free;
    } while (sub != 0);
}

std::vector<TernaryPattern> cube_cover(const std::vector<std::uint32_t>& on, int k)
{
    const std::uint64_t universe = low_mask(k);
    const auto primes = prime_implicants(on, k);

    // Dense per-minterm tables; k is at most kMaxSlotBits.
    std::vector<std::vector<std::size_t>> covering(universe + 1);
    for (std::size_t i = 0; i < primes.size(); ++i)
        for_each_member(primes[i], universe, [&](std::uint64_t v) { covering[v].push_back(i); });

    std::vector<bool> chosen(primes.size(), false);
    std::vector<char> covered(universe + 1, 0);
    auto take = [&](std::size_t i) {
        chosen[i] = true;
        for_each_member(primes[i], universe, [&](std::uint64_t v) { covered[v] = 1; });
    };
    for (auto m : on)
        if (covering[m].size() == 1 && !chosen[covering[m].front()])
            take(covering[m].front());

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < primes.size(); ++i)
        if (chosen[i])
            order.push_back(i);

    for (;;) {
        std::size_t best = primes.size();
        std::size_t best_gain = 0;
        for (std::size_t i = 0; i < primes.size(); ++i) {
            if (chosen[i])
                continue;
            std::size_t gain = 0;
            for_each_member(primes[i], universe, [&](std::uint64_t v) { gain += covered[v] ? 0 : 1; });
            const bool better = gain > best_gain ||
                (gain == best_gain && gain > 0 && best < primes.size() &&
                 std::tuple(primes[i].care_bits(), primes[i]) < std::tuple(primes[best].care_bits(), primes[best]));
            if (better) {
                best = i;
                best_gain = gain;
            }
        }
        if (best == primes.size())
            break;
        take(best);
        order.push_back(best);
    }

    // Drop any entry whose minterms are all covered by the others.
    std::vector<int> count(universe + 1, 0);
    for (auto i : order)
        for_each_member(primes[i], universe, [&](std::uint64_t v) { ++count[v]; });
    std::vector<TernaryPattern> out;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        bool redundant = true;
        for_each_member(primes[*it], universe, [&](std::uint64_t v) { redundant = redundant && count[v] > 1; });
        if (redundant)
            for_each_member(primes[*it], universe, [&](std::uint64_t v) { --count[v]; });
        else
            out.push_back(primes[*it]);
    }
    std::sort(out.begin(), out.end(), [](const TernaryPattern& a, const TernaryPattern& b) {
        return std::tuple(a.care_bits(), a.value) < std::tuple(b.care_bits(), b.value);
    });
    return out;
}

}  // namespace

TernaryPattern TernaryPattern::make(std::uint64_t value, std::uint64_t mask)
{
    if (value & ~mask)
        throw RangeError("ternary pattern has value bits outside its mask");
    return {value, mask};
}

int TernaryPattern::care_bits() const
{
    return std::popcount(mask);
}

std::uint32_t PeriodicRange::slot_index(std::uint64_t ts) const
{
    return static_cast<std::uint32_t>((ts >> slot_lsb.position()) & low_mask(slot_bits));
}

ValueSet::ValueSet(int width) : width_(width)
{
    check_width(width, kMaxOracleWidth);
    words_.assign(std::max<std::uint64_t>(1, universe() / 64), 0);
}

std::uint64_t ValueSet::size() const
{
    std::uint64_t n = 0;
    for (auto w : words_)
        n += static_cast<std::uint64_t>(std::popcount(w));
    return n;
}

std::vector<std::uint64_t> ValueSet::to_vector() const
{
    std::vector<std::uint64_t> out;
    for (std::uint64_t v = 0; v < universe(); ++v)
        if (contains(v))
            out.push_back(v);
    return out;
}

std::vector<TernaryPattern> compile_extremal(ExtremalRange r, int width)
{
    check_width(width, 64);
    const std::uint64_t wmask = low_mask(width);
    if (r.t0 & ~wmask)
        throw RangeError("t0 is not representable in " + std::to_string(width) + " bits");
    if (r.t0 == 0)
        return {TernaryPattern::wildcard()};

    const int lsb = std::countr_zero(r.t0);
    std::vector<TernaryPattern> out;
    for (int i = width - 1; i > lsb; --i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        if (r.t0 & bit)
            continue;
        const std::uint64_t mask = wmask & ~(bit - 1);
        out.push_back({(r.t0 & mask) | bit, mask});
    }
    const std::uint64_t exact = wmask & ~((std::uint64_t{1} << lsb) - 1);
    out.push_back({r.t0 & exact, exact});
    return out;
}

std::vector<TernaryPattern> compile_periodic(const PeriodicRange& r, bool allow_always)
{
    if (r.slot_bits < 1 || r.slot_bits > kMaxSlotBits)
        throw RangeError("slot_bits must be in 1.." + std::to_string(kMaxSlotBits));
    const int pos = r.slot_lsb.position();
    if (pos + r.slot_bits > 64)
        throw RangeError("slot field " + r.slot_lsb.str() + " + " + std::to_string(r.slot_bits) +
                         " bits runs past the timestamp");
    if (r.active_slots.empty())
        throw RangeError("periodic range has no active slots; use an explicit drop rule");
    const std::uint64_t nslots = std::uint64_t{1} << r.slot_bits;
    if (*r.active_slots.rbegin() >= nslots)
        throw RangeError("active slot index out of range for " + std::to_string(r.slot_bits) + " slot bits");
    if (r.active_slots.size() == nslots) {
        if (!allow_always)
            throw RangeError("periodic range covers every slot; pass allow_always for an always-range");
        return {TernaryPattern::wildcard()};
    }

    const std::vector<std::uint32_t> on(r.active_slots.begin(), r.active_slots.end());
    auto cover = cube_cover(on, r.slot_bits);
    for (auto& p : cover) {
        p.value <<= pos;
        p.mask <<= pos;
    }
    return cover;
}

WindowRules compile_window(std::uint64_t ta, std::uint64_t tb, int width)
{
    if (tb <= ta)
        throw RangeError("window end must be after its start");
    return {compile_extremal({tb}, width), compile_extremal({ta}, width)};
}

ValueSet oracle_members(const std::vector<TernaryPattern>& patterns, int width)
{
    ValueSet set(width);
    const std::uint64_t universe = low_mask(width);
    for (const auto& p : patterns)
        for_each_member(p, universe, [&](std::uint64_t v) { set.insert(v); });
    return set;
}

std::vector<TernaryPattern> minimize(const std::vector<TernaryPattern>& patterns, int width)
{
    check_width(width, 64);
    std::vector<TernaryPattern> cur;
    for (const auto& p : patterns) {
        TernaryPattern::make(p.value, p.mask);
        if (std::find(cur.begin(), cur.end(), p) == cur.end())
            cur.push_back(p);
    }

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < cur.size() && !changed; ++i)
            for (std::size_t j = 0; j < cur.size() && !changed; ++j)
                if (i != j && cur[i].subsumed_by(cur[j])) {
                    cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(i));
                    changed = true;
                }
        for (std::size_t i = 0; i < cur.size() && !changed; ++i)
            for (std::size_t j = i + 1; j < cur.size() && !changed; ++j) {
                const std::uint64_t diff = cur[i].value ^ cur[j].value;
                if (cur[i].mask == cur[j].mask && std::popcount(diff) == 1) {
                    cur[i] = {cur[i].value & ~diff, cur[i].mask & ~diff};
                    cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(j));
                    changed = true;
                }
            }
    }

    if (width <= kMaxOracleWidth && oracle_members(cur, width) != oracle_members(patterns, width))
        throw std::logic_error("minimize changed the matched set");
    return cur;
}

std::string render_bits(const TernaryPattern& p, int width)
{
    std::string s;
    for (int i = width - 1; i >= 0; --i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        s.push_back(!(p.mask & bit) ? '*' : (p.value & bit) ? '1' : '0');
    }
    return s;
}

std::string render_ntp(const TernaryPattern& p)
{
    const std::string all = render_bits(p, 64);
    return "Time.Sec " + all.substr(0, 32) + "  Time.Frac " + all.substr(32);
}

}  // namespace dptnet
