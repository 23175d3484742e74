#pragma once

// Counter-based random stream. Output k of a stream depends only on (seed, k),
// so a replay with the same seed and the same draw sequence reproduces every
// sample without relying on a platform standard-library engine.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace otdt {

class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

    constexpr std::uint64_t seed() const { return seed_; }
    constexpr std::uint64_t counter() const { return counter_; }

    /// SplitMix64 finalizer applied to seed + counter * golden-ratio increment.
    constexpr std::uint64_t next_u64() {
        ++counter_;
        std::uint64_t z = seed_ + counter_ * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on the open interval (0, 1).
    constexpr double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; always consumes exactly two draws.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    friend constexpr bool operator==(const CounterRng&, const CounterRng&) = default;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace otdt
