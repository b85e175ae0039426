#pragma once

#include <cstdint>

namespace cimle {

/// Counter-based deterministic random stream. The same seed and the same
/// call sequence produce the same values on every platform: the integer
/// path is pure 64-bit arithmetic (splitmix64) and the Gaussian transform
/// is a fixed rational approximation of the inverse normal CDF.
///
/// An Rng is single-owner. Parallel code must derive independent child
/// streams with fork(), which depends only on the original seed and the
/// tags, never on how much of the parent stream has been consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Next raw 64-bit value of the stream.
    std::uint64_t next_u64();

    /// Uniform double in the open interval (0, 1).
    double next_uniform();

    /// Standard normal draw via inverse-CDF transform of next_uniform().
    double next_gaussian();

    /// Child stream keyed by (seed, a, b, c). Replayable: forking twice
    /// with the same tags yields identical children regardless of how many
    /// values were drawn from the parent in between.
    Rng fork(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const;

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

/// Quantile function of the standard normal distribution (Wichura's
/// AS 241 rational approximation, double precision). p must lie in (0, 1).
double inverse_normal_cdf(double p);

} // namespace cimle
