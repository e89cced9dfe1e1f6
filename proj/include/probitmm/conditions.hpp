#pragma once

#include "probitmm/linalg.hpp"
#include "probitmm/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace probitmm {

enum class Verdict { pass, fail, boundary, assumed, not_applicable, inconclusive };

std::string to_string(Verdict v);

/// Pass-through verdicts: "assumed" is a user assertion and counts toward an overall pass.
inline bool passes(Verdict v) { return v == Verdict::pass || v == Verdict::assumed; }

struct ConditionResult {
    std::string name;
    Verdict verdict = Verdict::fail;
    std::string detail;
};

enum class LPStatus { feasible, infeasible, inconclusive };

std::string to_string(LPStatus s);

/// Outcome of the search for e > 0 with Wstar^T e = 0. The witness is normalized to e >= 1.
struct LPResult {
    LPStatus status = LPStatus::inconclusive;
    std::optional<Eigen::VectorXd> witness_e;
    Eigen::Index iterations = 0;
    double residual = 0.0; // ||Wstar^T e||_inf when a witness exists

    bool feasible() const { return status == LPStatus::feasible; }
};

/// True iff the numerical rank of M (singular values above tol * sigma_max) equals its
/// column count.
bool check_full_rank(const Eigen::MatrixXd& M, double tol = rank_tolerance);

/// Feasibility of {e : Wstar^T e = 0, e >= 1} by two-phase dense simplex with Bland's rule.
/// Phase 1 decides feasibility; phase 2 minimizes sum(e) to return a compact witness.
/// max_iterations = 0 selects the default cap of 10 * (rows + cols); hitting the cap yields
/// LPStatus::inconclusive, never infeasible.
LPResult check_positive_null_vector(const Eigen::MatrixXd& Wstar, Eigen::Index max_iterations = 0);

enum class Link { probit, logistic, user };

std::string to_string(Link link);

/// Link used by the propriety checker. For a user link the moment condition cannot be
/// verified numerically; moment_asserted records the caller's assertion.
struct LinkSpec {
    Link link = Link::probit;
    bool moment_asserted = false;
};

enum class ProprietyPath { A, B };
enum class ProprietyOverall { proper, not_established, not_applicable };

std::string to_string(ProprietyOverall o);

struct ProprietyReport {
    ProprietyPath path = ProprietyPath::B;
    std::vector<ConditionResult> conditions;
    ProprietyOverall overall = ProprietyOverall::not_established;
    std::optional<LPResult> lp;

    const ConditionResult* find(const std::string& name) const;
};

/// Power-prior conditions (all b_j = 0): full-rank W, positive null vector of Wstar,
/// 2a_j + q_j > 0, a_j < 0, and the link moment condition.
ProprietyReport check_conditions_A(const ProbitMixedModel& model, const LinkSpec& link = {});

/// Conditions on the reparametrized design, for general (a_j, b_j).
ProprietyReport check_conditions_B(const ProbitMixedModel& model, const LinkSpec& link = {});

/// A-path when every b_j is zero and it establishes propriety; otherwise the B-path when an
/// intercept is present; otherwise whichever was evaluated.
ProprietyReport check_propriety(const ProbitMixedModel& model, const LinkSpec& link = {});

/// Gamma(q/2 + a - s) / Gamma(q/2 + a), through log-gamma differences.
double gamma_ratio(double qj, double aj, double s);

/// tr(R_j (I - P) R_j^T) per block, with P the projector onto the column space of
/// Z^T (I - P_X) Z. Values below 1e-10 * q_j are snapped to zero.
Eigen::VectorXd trace_terms(const DesignGram<double>& gram);

/// 2^{-s} sum_j gamma_ratio(q_j, a_j, s) * trace_j^s, where a zero trace contributes zero.
double theorem4_lhs(const std::vector<Eigen::Index>& q, const Eigen::VectorXd& a, const Eigen::VectorXd& traces,
                    double s);

inline constexpr Eigen::Index default_grid_size = 200;
inline constexpr double boundary_margin = 1e-6;

struct GridCriterion {
    double s_tilde = 0.0;
    double upper = 0.0; // min(1, s_tilde)
    Eigen::VectorXd trace_terms;
    std::vector<std::pair<double, double>> grid; // (s, lhs)
    std::optional<double> s_star;
    double min_lhs = 0.0;
    Verdict verdict = Verdict::fail;
    std::string detail;
};

/// Evaluates the drift-criterion left-hand side on grid_size points s_k = (k + 1/2) h,
/// h = min(1, s_tilde) / grid_size. Holds iff the grid minimum is below one; within
/// boundary_margin of one the verdict is "boundary".
GridCriterion theorem4_criterion(const ProbitMixedModel& model, Eigen::Index grid_size = default_grid_size);

enum class ErgodicityPath { automatic, theorem2, theorem4 };
enum class ErgodicityOverall { geometric, not_established };

std::string to_string(ErgodicityOverall o);

struct ErgodicityReport {
    int theorem_path = 2;
    std::vector<ConditionResult> conditions;
    std::optional<GridCriterion> criterion;
    ErgodicityOverall overall = ErgodicityOverall::not_established;

    const ConditionResult* find(const std::string& name) const;
};

/// Theorem-2 path when W has full column rank (or when forced), Theorem-4 path otherwise.
ErgodicityReport check_geometric_ergodicity(const ProbitMixedModel& model,
                                            ErgodicityPath path = ErgodicityPath::automatic,
                                            Eigen::Index grid_size = default_grid_size);

} // namespace probitmm
