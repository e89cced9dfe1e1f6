#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace probitmm {

/// Raised when data or configuration violate a model invariant.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Binary responses and the fixed-effect design.
struct ObservationSet {
    Eigen::VectorXi y;
    Eigen::MatrixXd X;
    std::vector<std::string> x_names; // optional column labels for X

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index p() const { return X.cols(); }
};

/// Block-structured random-effect design Z = (Z_1, ..., Z_r). Each Z_j is an indicator matrix
/// with exactly one 1 per row; block_offsets[j] is the first column of Z_j, so extracting u_j
/// from u is u.segment(block_offsets[j], q[j]).
struct RandomEffectsStructure {
    std::vector<Eigen::Index> q;
    std::vector<Eigen::Index> block_offsets;
    Eigen::MatrixXd Z;
    std::vector<std::string> factor_names;
    std::vector<std::vector<std::string>> level_names;

    Eigen::Index r() const { return static_cast<Eigen::Index>(q.size()); }
    Eigen::Index total_q() const { return Z.cols(); }

    /// Builds Z from per-factor level indices (levels[j][i] in [0, num_levels[j])).
    static RandomEffectsStructure from_levels(const std::vector<std::vector<int>>& levels,
                                              const std::vector<int>& num_levels);
};

/// Prior pi(tau_j) proportional to exp(-b_j tau_j) tau_j^(a_j - 1); flat prior on beta.
struct PriorSpec {
    Eigen::VectorXd a;
    Eigen::VectorXd b;
};

/// Validated probit mixed model. Construct with make_model; the design W = (X | Z) is
/// assembled once and never changes afterwards.
class ProbitMixedModel {
public:
    const ObservationSet& obs() const { return obs_; }
    const RandomEffectsStructure& re() const { return re_; }
    const PriorSpec& prior() const { return prior_; }
    const Eigen::MatrixXd& W() const { return W_; }

    const Eigen::VectorXi& y() const { return obs_.y; }
    const Eigen::MatrixXd& X() const { return obs_.X; }
    const Eigen::MatrixXd& Z() const { return re_.Z; }

    Eigen::Index n() const { return obs_.n(); }
    Eigen::Index p() const { return obs_.p(); }
    Eigen::Index q() const { return re_.total_q(); }
    Eigen::Index r() const { return re_.r(); }

    /// True when the first column of X is identically one.
    bool has_intercept() const;

    /// beta_0..beta_{p-1}, then u_j_k (1-based j, k).
    std::vector<std::string> eta_labels() const;

private:
    friend ProbitMixedModel make_model(ObservationSet, RandomEffectsStructure, PriorSpec);

    ObservationSet obs_;
    RandomEffectsStructure re_;
    PriorSpec prior_;
    Eigen::MatrixXd W_;
};

void validate(const ObservationSet& obs);
void validate(const RandomEffectsStructure& re);
void validate(const PriorSpec& prior, Eigen::Index r);

/// Validates the pieces and their mutual consistency, then assembles W.
ProbitMixedModel make_model(ObservationSet obs, RandomEffectsStructure re, PriorSpec prior);

/// Response-signed design: row i of Wstar is c_i w_i^T, with c_i = 1 when y_i = 0 and
/// c_i = -1 when y_i = 1.
struct SignedDesign {
    Eigen::VectorXd c;
    Eigen::MatrixXd Wstar;
};

SignedDesign signed_design(const ProbitMixedModel& model);
Eigen::VectorXd response_signs(const Eigen::VectorXi& y);

/// Full-rank reparametrization. Each factor's first level is absorbed into the intercept
/// (mu_0 = beta_0 + sum_j u_j1) and the remaining levels become contrasts
/// d_jk = u_{j,k+1} - u_j1. Wtilde = (X, Ztilde) with Ztilde_j = Z_j minus its first column.
struct TransformedDesign {
    Eigen::MatrixXd Wtilde;
    Eigen::MatrixXd Wtilde_star;
    std::vector<std::string> param_names;
    Eigen::Index p = 0;
    std::vector<Eigen::Index> q;

    /// Maps eta = (beta, u) to the transformed parameter vector; W eta == Wtilde * transform(eta).
    Eigen::VectorXd transform(const Eigen::VectorXd& eta) const;
};

TransformedDesign transform_design(const ProbitMixedModel& model);

/// Parsed delimiter-separated table; every cell kept as text.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Eigen::Index column(const std::string& name) const;
};

struct ColumnRoles {
    std::string response;
    std::vector<std::string> fixed;
    std::vector<std::string> factors;
};

/// Builds a model from a table. X gets a leading intercept column; factor levels are indexed
/// by first appearance. A single-level factor under b_j = 0 is rejected, since the posterior
/// cannot be proper in that case.
ProbitMixedModel build_design(const Table& table, const ColumnRoles& roles, const PriorSpec& prior);

struct SimulatedData {
    ObservationSet obs;
    Eigen::VectorXd u;
};

/// Draws u_j ~ N(0, I / tau_j), then y_i ~ Bernoulli(Phi(x_i^T beta + z_i^T u)).
SimulatedData simulate_data(const Eigen::MatrixXd& X, const RandomEffectsStructure& re,
                            const Eigen::VectorXd& beta, const Eigen::VectorXd& tau, std::uint64_t seed);

/// Standard normal CDF.
double normal_cdf(double x);

} // namespace probitmm
