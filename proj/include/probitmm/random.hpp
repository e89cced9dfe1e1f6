#pragma once

#include <cstdint>
#include <random>

namespace probitmm {

/// Seeded random stream. Every draw in the library goes through one of these so that a
/// (seed, stream) pair fully determines a chain.
///
/// The uniform and normal generators are written out rather than taken from <random>'s
/// distributions, whose algorithms are implementation-defined; draws are therefore identical
/// across standard libraries.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

    /// Uniform on the open interval (0, 1).
    double uniform();
    /// Standard normal (Box-Muller, one output per call).
    double normal();
    /// Exponential with the given rate.
    double exponential(double rate);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    std::uint64_t stream_;
};

enum class TruncationSide { positive, nonpositive };

/// Normal(mu, sigma^2) restricted to (0, inf) or (-inf, 0].
///
/// Plain rejection from the untruncated normal when the retained region carries at least
/// 30% of the mass, translated-exponential rejection otherwise. Expected cost is bounded
/// uniformly in mu.
double draw_truncated_normal(double mu, double sigma, TruncationSide side, RandomStream& rng);

/// Gamma(shape, rate), mean shape / rate. Shape below one is handled by boosting to
/// shape + 1 and multiplying by U^(1/shape).
double draw_gamma(double shape, double rate, RandomStream& rng);

} // namespace probitmm
