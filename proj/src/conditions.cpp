#include "probitmm/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace probitmm {

using Eigen::Index;

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::boundary: return "boundary";
    case Verdict::assumed: return "assumed";
    case Verdict::not_applicable: return "not-applicable";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

std::string to_string(LPStatus s) {
    switch (s) {
    case LPStatus::feasible: return "feasible";
    case LPStatus::infeasible: return "infeasible";
    case LPStatus::inconclusive: return "inconclusive";
    }
    return "unknown";
}

std::string to_string(Link link) {
    switch (link) {
    case Link::probit: return "probit";
    case Link::logistic: return "logistic";
    case Link::user: return "user";
    }
    return "unknown";
}

std::string to_string(ProprietyOverall o) {
    switch (o) {
    case ProprietyOverall::proper: return "proper";
    case ProprietyOverall::not_established: return "not-established";
    case ProprietyOverall::not_applicable: return "not-applicable";
    }
    return "unknown";
}

std::string to_string(ErgodicityOverall o) {
    return o == ErgodicityOverall::geometric ? "geometric" : "not-established";
}

namespace {

template <typename Report>
const ConditionResult* find_condition(const Report& report, const std::string& name) {
    for (const auto& c : report.conditions)
        if (c.name == name) return &c;
    return nullptr;
}

Verdict verdict_of(bool ok) { return ok ? Verdict::pass : Verdict::fail; }

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

bool all_pass(const std::vector<ConditionResult>& conditions) {
    return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return passes(c.verdict); });
}

ConditionResult rank_condition(const std::string& name, const Eigen::MatrixXd& M, const std::string& what) {
    const Index rank = numerical_rank(M);
    return {name, verdict_of(rank == M.cols()),
            "rank(" + what + ") = " + std::to_string(rank) + ", columns = " + std::to_string(M.cols())};
}

ConditionResult lp_condition(const std::string& name, const LPResult& lp, const std::string& what) {
    ConditionResult c{name, Verdict::fail, ""};
    switch (lp.status) {
    case LPStatus::feasible:
        c.verdict = Verdict::pass;
        c.detail = "positive e with e^T " + what + " = 0 found (residual " + fmt(lp.residual) + ")";
        break;
    case LPStatus::infeasible:
        c.detail = "LP infeasible: no positive e with e^T " + what + " = 0";
        break;
    case LPStatus::inconclusive:
        c.verdict = Verdict::inconclusive;
        c.detail = "LP inconclusive after " + std::to_string(lp.iterations) + " pivots";
        break;
    }
    return c;
}

// Moment condition E|delta|^k < inf for delta ~ F. Normal and logistic have all moments.
ConditionResult moment_condition(const std::string& name, const LinkSpec& link, double order) {
    const std::string moment = "E|delta|^" + fmt(order) + " < inf";
    switch (link.link) {
    case Link::probit: return {name, Verdict::pass, moment + ": all normal moments are finite"};
    case Link::logistic: return {name, Verdict::pass, moment + ": all logistic moments are finite"};
    case Link::user:
        if (link.moment_asserted) return {name, Verdict::assumed, moment + ": asserted by user, not verified"};
        return {name, Verdict::fail, moment + ": user link without a moment assertion"};
    }
    return {name, Verdict::fail, "unknown link"};
}

// a_j < b_j = 0 or b_j > 0 (plus q_j >= 2 under b_j = 0 when require_two_levels).
ConditionResult prior_regime_condition(const std::string& name, const ProbitMixedModel& model, bool require_two_levels) {
    const auto& a = model.prior().a;
    const auto& b = model.prior().b;
    std::string detail;
    bool ok = true;
    for (Index j = 0; j < model.r(); ++j) {
        const auto qj = model.re().q[j];
        bool block_ok = b[j] > 0.0 || (b[j] == 0.0 && a[j] < 0.0 && (!require_two_levels || qj >= 2));
        if (!block_ok) {
            ok = false;
            detail += "block " + std::to_string(j + 1) + ": a=" + fmt(a[j]) + ", b=" + fmt(b[j]) + ", q=" + std::to_string(qj);
            if (b[j] == 0.0 && require_two_levels && qj < 2) detail += " (b = 0 needs q >= 2)";
            detail += "; ";
        }
    }
    if (ok) detail = "every block has a_j < b_j = 0" + std::string(require_two_levels ? " with q_j >= 2" : "") + " or b_j > 0";
    return {name, verdict_of(ok), detail};
}

// offset + 2 a_j + q_j > 0 for every block.
ConditionResult shape_condition(const std::string& name, const ProbitMixedModel& model, double offset) {
    bool ok = true;
    std::string detail;
    for (Index j = 0; j < model.r(); ++j) {
        const double value = 2.0 * model.prior().a[j] + static_cast<double>(model.re().q[j]) + offset;
        if (!(value > 0.0)) {
            ok = false;
            detail += "block " + std::to_string(j + 1) + ": value " + fmt(value) + "; ";
        }
    }
    if (ok) detail = offset == 0.0 ? "2a_j + q_j > 0 for every block" : "2a_j + q_j - 1 > 0 for every block";
    return {name, verdict_of(ok), detail};
}

} // namespace

const ConditionResult* ProprietyReport::find(const std::string& name) const { return find_condition(*this, name); }
const ConditionResult* ErgodicityReport::find(const std::string& name) const { return find_condition(*this, name); }

ProprietyReport check_conditions_A(const ProbitMixedModel& model, const LinkSpec& link) {
    ProprietyReport report;
    report.path = ProprietyPath::A;
    if ((model.prior().b.array() != 0.0).any()) {
        report.overall = ProprietyOverall::not_applicable;
        report.conditions.push_back({"A-path", Verdict::not_applicable, "requires b_j = 0 for every block"});
        return report;
    }

    report.conditions.push_back(rank_condition("A1", model.W(), "W"));
    report.lp = check_positive_null_vector(signed_design(model).Wstar);
    report.conditions.push_back(lp_condition("A2", *report.lp, "W*"));
    report.conditions.push_back(shape_condition("A3", model, 0.0));

    bool a4 = (model.prior().a.array() < 0.0).all();
    report.conditions.push_back({"A4", verdict_of(a4), a4 ? "a_j < 0 for every block" : "some a_j >= 0"});

    const double order = static_cast<double>(model.p()) - 2.0 * model.prior().a.sum();
    report.conditions.push_back(moment_condition("A5", link, order));

    report.overall = all_pass(report.conditions) ? ProprietyOverall::proper : ProprietyOverall::not_established;
    return report;
}

ProprietyReport check_conditions_B(const ProbitMixedModel& model, const LinkSpec& link) {
    ProprietyReport report;
    report.path = ProprietyPath::B;
    report.conditions.push_back(prior_regime_condition("B1", model, true));
    report.conditions.push_back(shape_condition("B2", model, -1.0));

    if (!model.has_intercept()) {
        report.conditions.push_back({"B3", Verdict::fail, "first column of X is not an intercept; reparametrization unavailable"});
        report.conditions.push_back({"B4", Verdict::fail, "first column of X is not an intercept; reparametrization unavailable"});
    } else {
        const auto td = transform_design(model);
        report.conditions.push_back(rank_condition("B3", td.Wtilde, "W~"));
        report.lp = check_positive_null_vector(td.Wtilde_star);
        report.conditions.push_back(lp_condition("B4", *report.lp, "W~*"));
    }

    double t = 0.0;
    for (Index j = 0; j < model.r(); ++j) {
        if (model.prior().b[j] == 0.0) t += -2.0 * model.prior().a[j];
        else t += static_cast<double>(model.re().q[j]) - 1.0;
    }
    report.conditions.push_back(moment_condition("B5", link, static_cast<double>(model.p()) + t));

    report.overall = all_pass(report.conditions) ? ProprietyOverall::proper : ProprietyOverall::not_established;
    return report;
}

ProprietyReport check_propriety(const ProbitMixedModel& model, const LinkSpec& link) {
    std::optional<ProprietyReport> a_report;
    if ((model.prior().b.array() == 0.0).all()) {
        a_report = check_conditions_A(model, link);
        if (a_report->overall == ProprietyOverall::proper) return *a_report;
    }
    if (model.has_intercept() || !a_report) return check_conditions_B(model, link);
    return *a_report;
}

double gamma_ratio(double qj, double aj, double s) {
    const double x = qj / 2.0 + aj;
    if (!(x - s > 0.0) || !(x > 0.0)) throw std::domain_error("gamma_ratio: nonpositive gamma argument");
    if (s == 0.0) return 1.0;
    return std::exp(std::lgamma(x - s) - std::lgamma(x));
}

Eigen::VectorXd trace_terms(const DesignGram<double>& gram) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(gram.r());
    if (gram.total_q() == 0) return out;
    const auto E = sym_eigen(gram.ZtPZ, rank_tolerance, false, psd_tolerance, max_abs(gram.ZtZ));
    const Eigen::MatrixXd complement = Eigen::MatrixXd::Identity(gram.total_q(), gram.total_q()) - projection_colspace(E);
    for (Index j = 0; j < gram.r(); ++j) {
        const double t = complement.diagonal().segment(gram.offsets[j], gram.q[j]).sum();
        out[j] = t < 1e-10 * static_cast<double>(gram.q[j]) ? 0.0 : t;
    }
    return out;
}

double theorem4_lhs(const std::vector<Index>& q, const Eigen::VectorXd& a, const Eigen::VectorXd& traces, double s) {
    double sum = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        const double t = traces[static_cast<Index>(j)];
        if (t == 0.0) continue;
        sum += gamma_ratio(static_cast<double>(q[j]), a[static_cast<Index>(j)], s) * std::pow(t, s);
    }
    return std::pow(2.0, -s) * sum;
}

GridCriterion theorem4_criterion(const ProbitMixedModel& model, Index grid_size) {
    GridCriterion out;
    if (grid_size < 1) throw std::invalid_argument("theorem4_criterion: grid_size must be positive");

    out.s_tilde = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < model.r(); ++j)
        out.s_tilde = std::min(out.s_tilde, model.prior().a[j] + static_cast<double>(model.re().q[j]) / 2.0);
    if (model.r() == 0) out.s_tilde = 1.0;
    out.upper = std::min(1.0, out.s_tilde);

    try {
        out.trace_terms = trace_terms(make_gram(model));
    } catch (const LinalgError& e) {
        out.verdict = Verdict::fail;
        out.detail = std::string("trace terms unavailable: ") + e.what();
        return out;
    }

    if (!(out.s_tilde > 0.0)) {
        out.verdict = Verdict::fail;
        out.detail = "s~ = min_j(a_j + q_j/2) = " + fmt(out.s_tilde) + " <= 0: the interval for s is empty";
        return out;
    }

    const double h = out.upper / static_cast<double>(grid_size);
    out.min_lhs = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < grid_size; ++k) {
        const double s = (static_cast<double>(k) + 0.5) * h;
        const double lhs = theorem4_lhs(model.re().q, model.prior().a, out.trace_terms, s);
        out.grid.emplace_back(s, lhs);
        if (lhs < out.min_lhs) {
            out.min_lhs = lhs;
            out.s_star = s;
        }
    }

    const double margin = 1.0 - out.min_lhs;
    if (std::abs(margin) < boundary_margin) {
        out.verdict = Verdict::boundary;
        out.detail = "grid minimum " + fmt(out.min_lhs) + " is within " + fmt(boundary_margin) + " of 1";
    } else if (out.min_lhs < 1.0) {
        out.verdict = Verdict::pass;
        out.detail = "holds: minimum " + fmt(out.min_lhs) + " at s = " + fmt(*out.s_star) + " (margin " + fmt(margin) + ")";
    } else {
        out.verdict = Verdict::fail;
        out.detail = "fails: grid minimum " + fmt(out.min_lhs) + " >= 1";
    }
    return out;
}

ErgodicityReport check_geometric_ergodicity(const ProbitMixedModel& model, ErgodicityPath path, Index grid_size) {
    ErgodicityReport report;
    const bool full_rank = check_full_rank(model.W());
    const bool use_theorem2 = path == ErgodicityPath::theorem2 || (path == ErgodicityPath::automatic && full_rank);

    if (use_theorem2) {
        report.theorem_path = 2;
        report.conditions.push_back(prior_regime_condition("T2.1", model, false));
        report.conditions.push_back(rank_condition("A1", model.W(), "W"));
        const auto lp = check_positive_null_vector(signed_design(model).Wstar);
        report.conditions.push_back(lp_condition("A2", lp, "W*"));
        report.conditions.push_back(shape_condition("A3", model, 0.0));
    } else {
        report.theorem_path = 4;
        const auto b_report = check_conditions_B(model, {});
        for (const auto& c : b_report.conditions)
            if (c.name != "B5") report.conditions.push_back(c);
        report.criterion = theorem4_criterion(model, grid_size);
        report.conditions.push_back({"T4.2", report.criterion->verdict, report.criterion->detail});
    }
    report.overall = all_pass(report.conditions) ? ErgodicityOverall::geometric : ErgodicityOverall::not_established;
    return report;
}

} // namespace probitmm
