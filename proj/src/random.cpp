#include "probitmm/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace probitmm {

namespace {

// Phi^{-1}(0.3): below this standardized mean naive rejection accepts less than 30% of
// proposals.
constexpr double naive_cutoff = -0.5244005127080407;

// Lower-tail draw: Z ~ N(0,1) conditioned on Z >= alpha, alpha > 0 (Robert, 1995).
double draw_normal_tail(double alpha, RandomStream& rng) {
    const double lambda = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
    for (;;) {
        const double z = alpha + rng.exponential(lambda);
        const double d = z - lambda;
        if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
    }
}

// Marsaglia-Tsang for shape >= 1, unit rate.
double draw_gamma_unit(double shape, RandomStream& rng) {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

} // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
}

double RandomStream::uniform() {
    // 53 random bits, shifted by half an ulp so that neither 0 nor 1 is produced.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RandomStream::exponential(double rate) { return -std::log(uniform()) / rate; }

double draw_truncated_normal(double mu, double sigma, TruncationSide side, RandomStream& rng) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("draw_truncated_normal: sigma must be positive");
    if (!std::isfinite(mu)) throw std::invalid_argument("draw_truncated_normal: mu must be finite");

    // Reduce to the positive side: X in (-inf, 0] is -Y with Y ~ TN(-mu, sigma, positive).
    const bool flip = side == TruncationSide::nonpositive;
    const double m = flip ? -mu : mu;

    double x;
    if (m / sigma >= naive_cutoff) {
        do {
            x = m + sigma * rng.normal();
        } while (!(x > 0.0));
    } else {
        const double alpha = -m / sigma;
        do {
            x = m + sigma * draw_normal_tail(alpha, rng);
        } while (!(x > 0.0)); // rounding can land exactly on the boundary
    }
    return flip ? -x : x;
}

double draw_gamma(double shape, double rate, RandomStream& rng) {
    if (!(shape > 0.0) || !std::isfinite(shape)) throw std::invalid_argument("draw_gamma: shape must be positive");
    if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("draw_gamma: rate must be positive");
    if (shape >= 1.0) return draw_gamma_unit(shape, rng) / rate;
    const double boosted = draw_gamma_unit(shape + 1.0, rng);
    const double draw = boosted * std::pow(rng.uniform(), 1.0 / shape) / rate;
    // Small shapes can underflow U^(1/shape); the result must stay strictly positive.
    return draw > 0.0 ? draw : std::numeric_limits<double>::min();
}

} // namespace probitmm
