#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace ccr {

// Stateless counter-based random bits. A draw is a pure function of its key,
// so sampling order and sharding never change results.
namespace rng {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash(std::initializer_list<std::uint64_t> key) noexcept {
    std::uint64_t h = 0x6a09e667f3bcc908ULL;
    for (auto k : key) h = mix64(h ^ mix64(k));
    return h;
}

// Uniform in [0, 1) with 53 bits of resolution.
inline double uniform(std::initializer_list<std::uint64_t> key) noexcept {
    return static_cast<double>(hash(key) >> 11) * 0x1.0p-53;
}

inline bool bernoulli(double p, std::initializer_list<std::uint64_t> key) noexcept {
    return uniform(key) < p;
}

// Uniform integer in [lo, hi].
inline std::int64_t uniform_int(std::int64_t lo, std::int64_t hi,
                                std::initializer_list<std::uint64_t> key) noexcept {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(hash(key) % span);
}

// Box-Muller on two derived uniforms.
inline double standard_normal(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    const double u1 = 1.0 - uniform({a, b, c, 0x4e4f524dULL});
    const double u2 = uniform({a, b, c, 0x4e4f524eULL});
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace rng

// Sequential generator over the same mixer, for places that need a stream
// (shuffles, rejection loops) rather than keyed draws.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t seed) noexcept : seed_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return rng::hash({seed_, counter_++}); }

    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>((*this)() % span);
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

} // namespace ccr
