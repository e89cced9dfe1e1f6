#pragma once

// Small model builders shared by the test binaries.

#include "probitmm/linalg.hpp"
#include "probitmm/model.hpp"
#include "probitmm/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace fixtures {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

inline probitmm::PriorSpec prior(std::vector<double> a, std::vector<double> b) {
    probitmm::PriorSpec p;
    p.a = Eigen::Map<VectorXd>(a.data(), static_cast<Index>(a.size()));
    p.b = Eigen::Map<VectorXd>(b.data(), static_cast<Index>(b.size()));
    return p;
}

inline probitmm::ProbitMixedModel model_from_levels(const MatrixXd& X, const VectorXi& y,
                                                    const std::vector<std::vector<int>>& levels,
                                                    const std::vector<int>& counts, const probitmm::PriorSpec& pr) {
    probitmm::ObservationSet obs;
    obs.X = X;
    obs.y = y;
    return probitmm::make_model(obs, probitmm::RandomEffectsStructure::from_levels(levels, counts), pr);
}

// Two-way crossed layout with one observation per cell, rows ordered (i, j) with j fastest,
// so Z_1 = I_{n1} (x) 1_{n2} and Z_2 = 1_{n1} (x) I_{n2}.
inline probitmm::ProbitMixedModel two_way(int n1, int n2, const VectorXi& y, const probitmm::PriorSpec& pr) {
    const Index n = n1 * n2;
    std::vector<std::vector<int>> levels(2, std::vector<int>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            levels[0][static_cast<std::size_t>(i * n2 + j)] = i;
            levels[1][static_cast<std::size_t>(i * n2 + j)] = j;
        }
    return model_from_levels(MatrixXd::Ones(n, 1), y, levels, {n1, n2}, pr);
}

// Balanced one-way layout: `groups` levels with `per_group` rows each, intercept only.
inline probitmm::ProbitMixedModel one_way(int groups, int per_group, const VectorXi& y, const probitmm::PriorSpec& pr) {
    const Index n = groups * per_group;
    std::vector<std::vector<int>> levels(1, std::vector<int>(static_cast<std::size_t>(n)));
    for (Index i = 0; i < n; ++i) levels[0][static_cast<std::size_t>(i)] = static_cast<int>(i / per_group);
    return model_from_levels(MatrixXd::Ones(n, 1), y, levels, {groups}, pr);
}

// n = 4, intercept only, one factor with a single level, a = 1.5, b = 1, y = (1, 1, 0, 0).
inline probitmm::ProbitMixedModel oracle_model() {
    VectorXi y(4);
    y << 1, 1, 0, 0;
    return model_from_levels(MatrixXd::Ones(4, 1), y, {{0, 0, 0, 0}}, {1}, prior({1.5}, {1.0}));
}

// Random mixed model: intercept plus Gaussian covariates, r factors with random level
// assignment (every level used at least once), mixed responses.
inline probitmm::ProbitMixedModel random_model(probitmm::RandomStream& rng, Index n, Index p,
                                               const std::vector<int>& counts, double a = 1.0, double b = 1.0) {
    MatrixXd X(n, p);
    X.col(0).setOnes();
    for (Index k = 1; k < p; ++k)
        for (Index i = 0; i < n; ++i) X(i, k) = rng.normal();
    std::vector<std::vector<int>> levels;
    for (int c : counts) {
        std::vector<int> lv(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i)
            lv[static_cast<std::size_t>(i)] =
                i < c ? static_cast<int>(i) : static_cast<int>(std::floor(rng.uniform() * c));
        levels.push_back(lv);
    }
    VectorXi y(n);
    for (Index i = 0; i < n; ++i) y[i] = i % 2 == 0 ? 1 : (rng.uniform() < 0.5 ? 1 : 0);
    std::vector<double> as(counts.size(), a);
    std::vector<double> bs(counts.size(), b);
    return model_from_levels(X, y, levels, counts, prior(as, bs));
}

inline int random_int(probitmm::RandomStream& rng, int lo, int hi) {
    return lo + static_cast<int>(std::floor(rng.uniform() * (hi - lo + 1)));
}

// Random full-column-rank design and block sizes for linear-algebra checks: returns a gram
// with n <= 30 rows and q <= 12 random-effect columns.
inline probitmm::DesignGram<double> random_gram(probitmm::RandomStream& rng) {
    const int p = random_int(rng, 1, 3);
    const int r = random_int(rng, 1, 3);
    std::vector<int> counts;
    int q = 0;
    for (int j = 0; j < r; ++j) {
        const int c = random_int(rng, 1, 4);
        counts.push_back(c);
        q += c;
    }
    const int n = std::min(30, std::max(q + p, random_int(rng, 4, 30)));
    auto model = random_model(rng, n, p, counts);
    return probitmm::make_gram(model);
}

inline VectorXd log_uniform_tau(probitmm::RandomStream& rng, Index r, double lo = 1e-3, double hi = 1e3) {
    VectorXd tau(r);
    for (Index j = 0; j < r; ++j) tau[j] = std::exp(std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo)));
    return tau;
}

} // namespace fixtures
