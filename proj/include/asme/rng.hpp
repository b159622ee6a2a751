#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace asme {

// All randomness in this library flows through the generators below so that
// a (seed, algorithm) pair fully determines every run. The algorithms are
// pinned here rather than taken from <random>, whose distributions are
// implementation defined.
//
//   seeding   SplitMix64, Steele/Lea/Burak variant: state += 0x9E3779B97F4A7C15,
//             output = mix(state) with the 30/27/31 xor-shift-multiply finalizer.
//   stream    derive_run_seed(base, i) = mix(base ^ mix(i + GOLDEN)), two
//             finalizer rounds; run i of an ensemble uses this as its seed.
//   core      xoshiro256** 1.0 (Blackman/Vigna), state seeded with four
//             SplitMix64 outputs.
//   doubles   53-bit mantissa fill: (x >> 11) * 2^-53, uniform on [0, 1).
//   integers  modulo rejection below the largest multiple of the bound.
//   normals   Box-Muller on two fresh uniforms per call (no caching).

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

    constexpr std::uint64_t next() {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

private:
    std::uint64_t state_;
};

/// Seed for run `run_index` of an ensemble rooted at `base_seed`.
inline constexpr std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t run_index) {
    return detail::mix64(base_seed ^ detail::mix64(run_index + detail::kGolden));
}

class Xoshiro256StarStar {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256StarStar(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& word : state_) word = sm.next();
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return UINT64_MAX; }

    result_type operator()() {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform double on [0, 1).
    double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform double on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, bound), bound >= 1. Lemire multiply-shift with
    /// rejection of the biased low fraction; no modulo in the common path.
    std::uint64_t uniform_below(std::uint64_t bound) {
        using u128 = unsigned __int128;
        std::uint64_t x = (*this)();
        u128 m = static_cast<u128>(x) * static_cast<u128>(bound);
        std::uint64_t low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                x = (*this)();
                m = static_cast<u128>(x) * static_cast<u128>(bound);
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Normal deviate via Box-Muller; consumes exactly two uniforms.
    double normal(double mean, double stddev) {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * radius * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_[4];
};

/// Fisher-Yates shuffle driven by the library generator.
template <typename T>
void shuffle(std::vector<T>& values, Xoshiro256StarStar& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace asme
