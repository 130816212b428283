#pragma once

// Counter-based random streams.
//
// Every stochastic input of a simulation (jump thresholds, perturbation
// vectors, initial-condition noise) is drawn from a stream that is a pure
// function of (master_seed, point_index, trajectory_index, tag). Any single
// trajectory can therefore be recomputed in isolation, and ensembles do not
// depend on scheduling order.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>

namespace kerr {

enum class StreamTag : std::uint64_t {
    jump_threshold = 1,
    perturbation = 2,
    initial_condition = 3,
    point = 4,
};

/// SplitMix64 finalizer (Stafford variant 13). Full avalanche on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stateless seed derivation. Each argument is absorbed through a full
/// mixing round so that a change in any single argument changes every
/// output bit with probability ~1/2.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t point_index,
                                    std::uint64_t trajectory_index, StreamTag tag) noexcept {
    constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
    std::uint64_t h = mix64(master_seed + golden);
    h = mix64(h ^ (point_index + 0x632be59bd9b4e019ULL));
    h = mix64((h + golden) ^ (trajectory_index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    h = mix64(h ^ (static_cast<std::uint64_t>(tag) * 0xa0761d6478bd642fULL));
    return h;
}

/// Counter-mode SplitMix64: the k-th output is mix64(seed + (k+1)*golden).
/// Satisfies UniformRandomBitGenerator. The counter can be read back, which
/// makes any stream position reproducible.
class CounterRng {
  public:
    using result_type = std::uint64_t;

    constexpr explicit CounterRng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        ++counter_;
        return mix64(seed_ + counter_ * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform double on the open interval (0, 1).
    double uniform_open() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard complex Gaussian: real and imaginary parts N(0, 1/2),
    /// so E|z|^2 = 1. Box-Muller, no cached spare, for positional
    /// reproducibility.
    std::complex<double> complex_gaussian() noexcept {
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double r = std::sqrt(-std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(phi), r * std::sin(phi)};
    }

    /// Real standard normal N(0, 1).
    double normal() noexcept {
        return std::sqrt(2.0) * complex_gaussian().real();
    }

    constexpr std::uint64_t seed() const noexcept { return seed_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace kerr
