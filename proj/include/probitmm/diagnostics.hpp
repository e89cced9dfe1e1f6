#pragma once

#include "probitmm/model.hpp"
#include "probitmm/sampler.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace probitmm {

inline constexpr Eigen::Index min_series_length = 100;

struct BatchMeans {
    double sigma2_hat = 0.0; // asymptotic variance estimate of the time average
    double mcse = 0.0;       // sqrt(sigma2_hat / m)
    Eigen::Index batch_size = 0;
    Eigen::Index batches = 0;
};

/// Batch size floor(sqrt(m)), floor(m / b) batches, remainder dropped from the front.
BatchMeans batch_means(const Eigen::Ref<const Eigen::VectorXd>& series);

struct EssResult {
    double ess = 0.0;
    bool constant = false; // constant series: ess reported as m by convention
};

/// m * var(series) / sigma2_hat, clipped to [1, m].
EssResult ess(const Eigen::Ref<const Eigen::VectorXd>& series);

double lag1_autocorrelation(const Eigen::Ref<const Eigen::VectorXd>& series);

struct ParameterSummary {
    std::string label;
    double mean = 0.0;
    double sd = 0.0;
    double mcse = 0.0;
    double ess = 0.0;
    double lag1 = 0.0;
    bool constant = false;
};

struct SummaryReport {
    std::vector<ParameterSummary> parameters;
    Eigen::Index retained = 0;
    std::string algorithm;
    std::uint64_t seed = 0;

    const ParameterSummary& at(const std::string& label) const;
};

SummaryReport summarize(const Eigen::MatrixXd& draws, const std::vector<std::string>& labels);
SummaryReport summarize(const ChainOutput& out);

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(Eigen::Index n);

struct OracleResult {
    Eigen::VectorXd beta_mean;
    Eigen::VectorXd u_mean;
    Eigen::VectorXd tau_mean;
    Eigen::VectorXd sd; // posterior sd of (beta, u, tau), same order
    Eigen::Index nodes = 0;
    Eigen::Index dimension = 0;
    /// max_k |mean_k(nodes) - mean_k(nodes/2)| / max(|mean_k(nodes)|, sd_k)
    double estimated_error = 0.0;
    bool converged = false; // estimated_error < oracle_tolerance
};

inline constexpr double oracle_tolerance = 1e-3;
inline constexpr double oracle_box = 10.0;
inline constexpr double oracle_log_tau_lo = -12.0;
inline constexpr double oracle_log_tau_hi = 8.0;

/// Posterior means by tensor Gauss-Legendre quadrature of the full unnormalized joint over
/// (beta, u, log tau): beta and u on [-10, 10], log tau on [-12, 8]. Restricted to
/// p + q + r <= 5 with b_j > 0 and propriety established.
OracleResult oracle_posterior_mean(const ProbitMixedModel& model, Eigen::Index nodes);

struct AlgorithmComparison {
    std::string label;
    double ess_gibbs = 0.0;
    double ess_pxda = 0.0;
    double lag1_gibbs = 0.0;
    double lag1_pxda = 0.0;
    double ess_per_second_gibbs = 0.0;
    double ess_per_second_pxda = 0.0;
    bool pxda_no_worse = false; // lag1_pxda <= lag1_gibbs + comparison_slack
};

inline constexpr double comparison_slack = 0.05;

struct ComparisonReport {
    SummaryReport gibbs;
    SummaryReport pxda;
    std::vector<AlgorithmComparison> parameters;
    std::uint64_t seed_gibbs = 0;
    std::uint64_t seed_pxda = 0;
    double seconds_gibbs = 0.0;
    double seconds_pxda = 0.0;
    Eigen::Index iterations = 0;
    bool expectation_met = false;
};

/// Runs both algorithms on the same seed and iteration budget (concurrently, each on its own
/// stream object) and compares per-parameter mixing.
ComparisonReport compare_algorithms(const ProbitMixedModel& model, const SamplerConfig& config);

/// Lags 0..max_lag of the sample autocorrelation function.
Eigen::VectorXd autocorrelation(const Eigen::Ref<const Eigen::VectorXd>& series, Eigen::Index max_lag);

} // namespace probitmm
