#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "core.hpp"

namespace nocutoff {

/// Stream roles used when splitting a run seed. Each (seed, replica, role)
/// triple addresses an independent counter-based stream.
enum class StreamRole : std::uint64_t {
    initial = 1,
    events = 2,
    background = 3,
    bootstrap = 4,
    property = 5,
};

inline constexpr std::uint64_t splitmix_finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based 64-bit generator.
///
/// Output k of the stream with key K is finalize(K + (k+1) * W), where W is
/// the 64-bit golden-ratio increment and finalize is the SplitMix64 mixer.
/// The key is derived from (seed, replica, role) by chained mixing, so streams
/// are reproducible, position-addressable (skip() is O(1)) and independent of
/// thread scheduling. Satisfies UniformRandomBitGenerator.
class CounterRng {
  public:
    using result_type = std::uint64_t;
    static constexpr std::uint64_t kIncrement = 0x9e3779b97f4a7c15ULL;

    constexpr CounterRng() noexcept : CounterRng(0) {}
    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    static constexpr CounterRng stream(std::uint64_t seed, std::uint64_t replica,
                                       StreamRole role) noexcept {
        std::uint64_t k = splitmix_finalize(seed + kIncrement);
        k = splitmix_finalize(k ^ (replica * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
        k = splitmix_finalize(k ^ (static_cast<std::uint64_t>(role) * 0xa0761d6478bd642fULL));
        return CounterRng(k);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    constexpr result_type operator()() noexcept {
        ++counter_;
        return splitmix_finalize(key_ + counter_ * kIncrement);
    }

    constexpr void skip(std::uint64_t n) noexcept { counter_ += n; }
    constexpr std::uint64_t position() const noexcept { return counter_; }
    constexpr std::uint64_t key() const noexcept { return key_; }

    /// Uniform on [0,1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }
    /// Uniform on (0,1].
    double uniform_pos() noexcept { return 1.0 - uniform(); }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) noexcept {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n));
    }

    double exponential(double rate) noexcept { return -std::log(uniform_pos()) / rate; }

    /// Standard normal pair by Box-Muller (platform-independent, unlike
    /// std::normal_distribution).
    Vec2 normal2() noexcept {
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double phi = 2.0 * kPi * uniform();
        return {r * std::cos(phi), r * std::sin(phi)};
    }

  private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace nocutoff
