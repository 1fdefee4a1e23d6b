#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace transgap {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit FNV-1a hash of a purpose tag.
std::uint64_t fnv1a(std::string_view s);

/// Stream id for a (seed, purpose) pair: splitmix64(seed XOR splitmix64(fnv1a(tag))).
std::uint64_t stream_seed(std::uint64_t seed, std::string_view tag);

/// Deterministic generator: std::mt19937_64 seeded with stream_seed(seed, tag).
/// All distributions are implemented here (not via <random> distributions) so
/// that output is identical across standard library implementations.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view tag);

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n), unbiased by rejection.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via the Box-Muller transform (one value per call).
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace transgap
