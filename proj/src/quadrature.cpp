#include "probitmm/diagnostics.hpp"

#include "probitmm/conditions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace probitmm {

using Eigen::Index;

namespace {

double log_normal_cdf(double x) {
    if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
    // Mills-ratio expansion for the far lower tail.
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

struct Moments {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
};

// One tensor-product pass at a fixed node count. Parameters are ordered (beta, u, tau); the
// tau coordinates are integrated as theta = log tau.
Moments integrate(const ProbitMixedModel& model, Index nodes) {
    const Index p = model.p();
    const Index q = model.q();
    const Index r = model.r();
    const Index d = p + q + r;

    const auto [t, w] = gauss_legendre(nodes);
    const double theta_mid = 0.5 * (oracle_log_tau_hi + oracle_log_tau_lo);
    const double theta_half = 0.5 * (oracle_log_tau_hi - oracle_log_tau_lo);
    const Eigen::VectorXd box_x = oracle_box * t;
    const Eigen::VectorXd theta_x = (theta_mid + theta_half * t.array()).matrix();
    const Eigen::VectorXd log_w = w.array().log();
    const double log_box = std::log(oracle_box);
    const double log_theta_half = std::log(theta_half);

    const Eigen::VectorXd c = response_signs(model.y());
    const auto& re = model.re();
    const auto& prior = model.prior();

    double max_log = -std::numeric_limits<double>::infinity();
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd s2 = Eigen::VectorXd::Zero(d);

    std::vector<Index> idx(static_cast<std::size_t>(d), 0);
    Eigen::VectorXd eta(p + q);
    Eigen::VectorXd point(d);
    for (;;) {
        double log_f = 0.0;
        for (Index k = 0; k < p + q; ++k) {
            eta[k] = box_x[idx[static_cast<std::size_t>(k)]];
            log_f += log_w[idx[static_cast<std::size_t>(k)]] + log_box;
            point[k] = eta[k];
        }
        const Eigen::VectorXd lin = model.W() * eta;
        for (Index i = 0; i < model.n(); ++i) log_f += log_normal_cdf(-c[i] * lin[i]);
        for (Index j = 0; j < r; ++j) {
            const auto node = idx[static_cast<std::size_t>(p + q + j)];
            const double theta = theta_x[node];
            const double tau = std::exp(theta);
            const double ss = eta.segment(p + re.block_offsets[j], re.q[j]).squaredNorm();
            // tau^(q/2 + a - 1) * exp(-tau (b + ss/2)) * dtau/dtheta
            log_f += (static_cast<double>(re.q[j]) / 2.0 + prior.a[j]) * theta - tau * (prior.b[j] + ss / 2.0);
            log_f += log_w[node] + log_theta_half;
            point[p + q + j] = tau;
        }

        if (log_f > -std::numeric_limits<double>::infinity()) {
            if (log_f > max_log) {
                const double shrink = std::exp(max_log - log_f);
                s0 *= shrink;
                s1 *= shrink;
                s2 *= shrink;
                max_log = log_f;
            }
            const double f = std::exp(log_f - max_log);
            s0 += f;
            s1 += f * point;
            s2 += f * point.cwiseAbs2();
        }

        Index k = 0;
        while (k < d && ++idx[static_cast<std::size_t>(k)] == nodes) idx[static_cast<std::size_t>(k++)] = 0;
        if (k == d) break;
    }

    if (!(s0 > 0.0)) throw std::runtime_error("oracle_posterior_mean: integrand vanished on the quadrature grid");
    Moments m;
    m.mean = s1 / s0;
    m.sd = (s2 / s0 - m.mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
    return m;
}

} // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(Index n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
    Eigen::VectorXd x(n);
    Eigen::VectorXd w(n);
    for (Index i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = 0.0;
            for (Index k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * static_cast<double>(k) - 1.0) * z * p1 - (static_cast<double>(k) - 1.0) * p2) / static_cast<double>(k);
            }
            dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-15) break;
        }
        // Recompute the derivative at the converged root.
        double p0 = 1.0;
        double p1 = 0.0;
        for (Index k = 1; k <= n; ++k) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * static_cast<double>(k) - 1.0) * z * p1 - (static_cast<double>(k) - 1.0) * p2) / static_cast<double>(k);
        }
        dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    if (n % 2 == 1) x[n / 2] = 0.0;
    return {x, w};
}

OracleResult oracle_posterior_mean(const ProbitMixedModel& model, Index nodes) {
    const Index d = model.p() + model.q() + model.r();
    if (d > 5) throw std::invalid_argument("oracle_posterior_mean: p + q + r must not exceed 5");
    if (model.r() == 0 || !(model.prior().b.array() > 0.0).all())
        throw std::invalid_argument("oracle_posterior_mean: requires r >= 1 and b_j > 0 for every block");
    if (nodes < 4) throw std::invalid_argument("oracle_posterior_mean: need at least 4 nodes");
    if (check_propriety(model).overall != ProprietyOverall::proper)
        throw std::invalid_argument("oracle_posterior_mean: propriety is not established for this model");

    const Moments fine = integrate(model, nodes);
    const Moments coarse = integrate(model, nodes / 2);

    OracleResult out;
    out.nodes = nodes;
    out.dimension = d;
    out.beta_mean = fine.mean.head(model.p());
    out.u_mean = fine.mean.segment(model.p(), model.q());
    out.tau_mean = fine.mean.tail(model.r());
    out.sd = fine.sd;
    for (Index k = 0; k < d; ++k) {
        const double scale = std::max(std::abs(fine.mean[k]), fine.sd[k]);
        out.estimated_error = std::max(out.estimated_error, std::abs(fine.mean[k] - coarse.mean[k]) / scale);
    }
    out.converged = out.estimated_error < oracle_tolerance;
    return out;
}

} // namespace probitmm
