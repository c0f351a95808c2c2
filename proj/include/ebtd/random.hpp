#pragma once

// Counter-based random streams. Each stream is addressed by (seed, role,
// index) and produces the same sequence no matter which thread draws it or in
// what order streams are created, which is what makes Monte Carlo output
// independent of the thread count.

#include <cstdint>
#include <limits>
#include <random>

namespace ebtd {

enum class StreamRole : std::uint64_t {
    Truth = 1,
    WorkerVariance = 2,
    Noise = 3,
    Subsample = 4,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent 64-bit seed from a parent seed and an index.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept
{
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// UniformRandomBitGenerator: output k is splitmix64(key + k * gamma).
class KeyedStream {
public:
    using result_type = std::uint64_t;

    KeyedStream(std::uint64_t seed, StreamRole role, std::uint64_t index) noexcept
        : key_(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(role)), index))
    {
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        ++counter_;
        return splitmix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
    }

    double normal(double mean, double sd)
    {
        return mean + sd * normal_(*this);
    }

    // Unbiased integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept
    {
        const std::uint64_t limit = max() - max() % bound;
        std::uint64_t draw = (*this)();
        while (draw >= limit) {
            draw = (*this)();
        }
        return draw % bound;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace ebtd
