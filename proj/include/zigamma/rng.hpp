#pragma once

// Counter-based seeding for reproducible Monte Carlo.
//
// Every random quantity is drawn from an engine whose seed is a pure
// function of (master seed, coordinates), so the result of a draw does not
// depend on the order in which work items run or on the worker count.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace zigamma::rng {

/// One round of the SplitMix64 output function.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive a child seed from a parent seed and a list of integer coordinates.
constexpr std::uint64_t derive(std::uint64_t seed,
                               std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (auto c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

/// xoshiro256** (Blackman & Vigna). Small state, cheap to seed, which
/// matters because one engine is created per panel cell.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept {
        // Standard SplitMix64 stream; never yields the all-zero state.
        for (std::size_t i = 0; i < state_.size(); ++i)
            state_[i] = splitmix64(seed + i * 0x9e3779b97f4a7c15ULL);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace zigamma::rng
