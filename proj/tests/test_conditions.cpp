#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "probitmm/conditions.hpp"

#include <cmath>
#include <numbers>

using namespace probitmm;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

VectorXi two_way_y() {
    VectorXi y(6);
    y << 1, 0, 0, 1, 1, 0;
    return y;
}

// Full-rank W without intercept: covariate x plus 3 groups, each holding rows
// (x, y) = (1,1), (1,0), (2,1), (2,0), so e = 1 solves W*^T e = 0.
ProbitMixedModel full_rank_model(double a, double b) {
    const Index n = 12;
    MatrixXd X(n, 1);
    VectorXi y(n);
    std::vector<int> lv(n);
    for (Index i = 0; i < n; ++i) {
        X(i, 0) = (i % 4) < 2 ? 1.0 : 2.0;
        y[i] = (i % 2) == 0 ? 1 : 0;
        lv[static_cast<std::size_t>(i)] = static_cast<int>(i / 4);
    }
    return fixtures::model_from_levels(X, y, {lv}, {3}, fixtures::prior({a}, {b}));
}

// Integer brute force for {e > 0 : W*^T e = 0}: search e in {1..K}^n.
bool grid_feasible(const MatrixXd& Ws, int K) {
    const Index n = Ws.rows();
    std::vector<int> e(static_cast<std::size_t>(n), 1);
    for (;;) {
        VectorXd ev(n);
        for (Index i = 0; i < n; ++i) ev[i] = e[static_cast<std::size_t>(i)];
        if ((Ws.transpose() * ev).cwiseAbs().maxCoeff() == 0.0) return true;
        Index k = 0;
        while (k < n && ++e[static_cast<std::size_t>(k)] > K) e[static_cast<std::size_t>(k++)] = 1;
        if (k == n) return false;
    }
}

// Stiemke alternative: infeasible iff some y has W* y >= 0 with W* y != 0. Search y in
// {-K..K}^p.
bool grid_infeasible(const MatrixXd& Ws, int K) {
    const Index p = Ws.cols();
    std::vector<int> y(static_cast<std::size_t>(p), -K);
    for (;;) {
        VectorXd yv(p);
        for (Index k = 0; k < p; ++k) yv[k] = y[static_cast<std::size_t>(k)];
        const VectorXd w = Ws * yv;
        if (w.minCoeff() >= 0.0 && w.maxCoeff() > 0.0) return true;
        Index k = 0;
        while (k < p && ++y[static_cast<std::size_t>(k)] > K) y[static_cast<std::size_t>(k++)] = -K;
        if (k == p) return false;
    }
}

} // namespace

TEST_CASE("check_full_rank: two-way example") {
    const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({1, 1}, {1, 1}));
    CHECK_FALSE(check_full_rank(model.W()));
    CHECK(numerical_rank(model.W()) == 4);
    CHECK(check_full_rank(transform_design(model).Wtilde));
    CHECK(check_full_rank(MatrixXd::Identity(4, 4)));
}

TEST_CASE("LP: intercept-only examples") {
    MatrixXd Ws(2, 1);
    Ws << -1, 1;
    auto res = check_positive_null_vector(Ws);
    REQUIRE(res.feasible());
    CHECK(res.witness_e->isApprox(VectorXd::Ones(2)));
    CHECK(res.residual == 0.0);

    Ws << -1, -1;
    res = check_positive_null_vector(Ws);
    CHECK(res.status == LPStatus::infeasible);
    CHECK_FALSE(res.witness_e.has_value());
}

TEST_CASE("LP: planted witnesses are recovered") {
    RandomStream rng(31);
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = fixtures::random_int(rng, 2, 20);
        const Index k = fixtures::random_int(rng, 1, static_cast<int>(std::min<Index>(n - 1, 6)));
        VectorXd e(n);
        for (Index i = 0; i < n; ++i) e[i] = 0.1 + 3.0 * rng.uniform();
        MatrixXd M(n, k);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < k; ++j) M(i, j) = rng.normal();
        const MatrixXd Ws = M - e * (e.transpose() * M) / e.squaredNorm();
        const auto res = check_positive_null_vector(Ws);
        REQUIRE(res.feasible());
        CHECK(res.witness_e->minCoeff() >= 1.0 - 1e-9);
        CHECK(res.residual < 1e-8);
        CHECK((Ws.transpose() * *res.witness_e).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, Ws.norm()));
    }
}

TEST_CASE("LP: agrees with brute force on tiny sign matrices") {
    RandomStream rng(32);
    int decided = 0;
    int total = 0;
    for (int rep = 0; rep < 300; ++rep) {
        const Index n = fixtures::random_int(rng, 2, 6);
        const Index p = fixtures::random_int(rng, 1, 3);
        MatrixXd Ws(n, p);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) Ws(i, j) = fixtures::random_int(rng, -1, 1);
        ++total;
        const auto res = check_positive_null_vector(Ws);
        CHECK(res.status != LPStatus::inconclusive);
        if (grid_feasible(Ws, 4)) {
            ++decided;
            CHECK(res.feasible());
        } else if (grid_infeasible(Ws, 3)) {
            ++decided;
            CHECK(res.status == LPStatus::infeasible);
        }
    }
    // The grids are coarse; most instances must still be decided by them.
    CHECK(decided >= total * 9 / 10);
}

TEST_CASE("LP: a column of one sign is infeasible") {
    MatrixXd Ws(4, 2);
    Ws << 1, -1, 0, 1, 2, 0, 1, 1;
    CHECK(check_positive_null_vector(Ws).status == LPStatus::infeasible);
}

TEST_CASE("LP: iteration cap reports inconclusive, never infeasible") {
    RandomStream rng(33);
    const Index n = 15;
    VectorXd e = VectorXd::Ones(n);
    MatrixXd M(n, 4);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < 4; ++j) M(i, j) = rng.normal();
    const MatrixXd Ws = M - e * (e.transpose() * M) / e.squaredNorm();
    const auto res = check_positive_null_vector(Ws, 1);
    CHECK(res.status == LPStatus::inconclusive);
}

TEST_CASE("conditions A") {
    SUBCASE("all pass") {
        const auto report = check_conditions_A(full_rank_model(-0.5, 0.0));
        CHECK(report.overall == ProprietyOverall::proper);
        for (const auto& c : report.conditions) CHECK_MESSAGE(c.verdict == Verdict::pass, c.name);
        REQUIRE(report.lp.has_value());
        CHECK(report.lp->feasible());
    }
    SUBCASE("a >= 0 fails A4") {
        const auto report = check_conditions_A(full_rank_model(0.1, 0.0));
        CHECK(report.find("A4")->verdict == Verdict::fail);
        CHECK(report.overall == ProprietyOverall::not_established);
    }
    SUBCASE("b > 0 is outside the A-path") {
        const auto report = check_conditions_A(full_rank_model(-0.5, 1.0));
        CHECK(report.overall == ProprietyOverall::not_applicable);
    }
    SUBCASE("rank-deficient W fails A1") {
        const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({-0.25, -0.25}, {0, 0}));
        CHECK(check_conditions_A(model).find("A1")->verdict == Verdict::fail);
    }
}

TEST_CASE("conditions B") {
    SUBCASE("two-way example, proper") {
        const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({-0.25, -0.25}, {0, 0}));
        const auto report = check_conditions_B(model);
        for (const auto& c : report.conditions) CHECK_MESSAGE(c.verdict == Verdict::pass, c.name);
        CHECK(report.overall == ProprietyOverall::proper);
        CHECK(check_propriety(model).path == ProprietyPath::B);
        CHECK(check_propriety(model).overall == ProprietyOverall::proper);
    }
    SUBCASE("a = -1/2 with a two-level factor sits on the B2 boundary") {
        // 2a + q - 1 = 0 for the second factor; the inequality is strict.
        const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({-0.5, -0.5}, {0, 0}));
        const auto report = check_conditions_B(model);
        CHECK(report.find("B1")->verdict == Verdict::pass);
        CHECK(report.find("B2")->verdict == Verdict::fail);
        CHECK(report.find("B3")->verdict == Verdict::pass);
        CHECK(report.find("B4")->verdict == Verdict::pass);
    }
    SUBCASE("q_j = 1 with b_j = 0 fails B1") {
        ObservationSet obs;
        obs.X = MatrixXd::Ones(4, 1);
        obs.y = VectorXi(4);
        obs.y << 1, 0, 1, 0;
        const auto model =
            make_model(obs, RandomEffectsStructure::from_levels({{0, 0, 0, 0}}, {1}), fixtures::prior({-0.5}, {0}));
        CHECK(check_conditions_B(model).find("B1")->verdict == Verdict::fail);
    }
    SUBCASE("b_j > 0 with 2a + q - 1 > 0 passes B1 and B2") {
        const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({3.0, -0.4}, {2.0, 0.5}));
        const auto report = check_conditions_B(model);
        CHECK(report.find("B1")->verdict == Verdict::pass);
        CHECK(report.find("B2")->verdict == Verdict::pass);
    }
    SUBCASE("all-ones response fails B4") {
        const auto model = fixtures::two_way(3, 2, VectorXi::Ones(6), fixtures::prior({1, 1}, {1, 1}));
        const auto report = check_propriety(model);
        CHECK(report.find("B4")->verdict == Verdict::fail);
        CHECK(report.lp->status == LPStatus::infeasible);
        CHECK(report.overall == ProprietyOverall::not_established);
    }
    SUBCASE("no intercept fails B3 and B4") {
        const auto report = check_conditions_B(full_rank_model(-0.5, 1.0));
        CHECK(report.find("B3")->verdict == Verdict::fail);
        CHECK(report.find("B4")->verdict == Verdict::fail);
    }
}

TEST_CASE("link moment condition") {
    const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({1, 1}, {1, 1}));
    CHECK(check_propriety(model, {Link::logistic, false}).find("B5")->verdict == Verdict::pass);
    const auto assumed = check_propriety(model, {Link::user, true});
    CHECK(assumed.find("B5")->verdict == Verdict::assumed);
    CHECK(assumed.overall == ProprietyOverall::proper);
    const auto unasserted = check_propriety(model, {Link::user, false});
    CHECK(unasserted.find("B5")->verdict == Verdict::fail);
    CHECK(unasserted.overall == ProprietyOverall::not_established);
}

TEST_CASE("gamma_ratio") {
    CHECK(gamma_ratio(4, 0, 0.5) == doctest::Approx(std::sqrt(std::numbers::pi) / 2.0).epsilon(1e-13));
    CHECK(gamma_ratio(4, 0, 0.5) == doctest::Approx(0.8862269254527580).epsilon(1e-13));
    CHECK(gamma_ratio(3, 1, 0.0) == 1.0);
    CHECK(gamma_ratio(2, 0.5, 1.0) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK_THROWS_AS(gamma_ratio(2, 0.0, 1.0), std::domain_error);

    RandomStream rng(34);
    for (int k = 0; k < 200; ++k) {
        const double q = fixtures::random_int(rng, 1, 10);
        const double a = -0.4 + 3.0 * rng.uniform();
        const double x = q / 2.0 + a;
        const double s = 0.45 * x * rng.uniform();
        const double t = 0.45 * x * rng.uniform();
        const double lhs = gamma_ratio(q, a, s) * gamma_ratio(q, a - s, t);
        CHECK(lhs == doctest::Approx(gamma_ratio(q, a, s + t)).epsilon(1e-10));
    }
}

TEST_CASE("theorem4 criterion: balanced one-way closed form") {
    const auto model = fixtures::one_way(2, 2, VectorXi::Zero(4), fixtures::prior({1.5}, {1.0}));
    const auto crit = theorem4_criterion(model);
    REQUIRE(crit.trace_terms.size() == 1);
    CHECK(crit.trace_terms[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(theorem4_lhs(model.re().q, model.prior().a, crit.trace_terms, 1.0) - 1.0 / 3.0) < 1e-10);
    CHECK(crit.s_tilde == 2.5);
    CHECK(crit.upper == 1.0);
    CHECK(crit.verdict == Verdict::pass);
    CHECK(crit.min_lhs < 1.0);
    CHECK(crit.grid.size() == static_cast<std::size_t>(default_grid_size));
    CHECK(crit.grid.front().first > 0.0);
    CHECK(crit.grid.back().first < crit.upper);
}

TEST_CASE("theorem4 criterion: edge cases") {
    SUBCASE("zero traces give LHS = 0") {
        // X is a non-constant covariate within groups, so Z^T (I - P_X) Z is nonsingular.
        MatrixXd X(4, 1);
        X << 1, 2, 3, 5;
        VectorXi y(4);
        y << 1, 0, 1, 0;
        const auto model = fixtures::model_from_levels(X, y, {{0, 0, 1, 1}}, {2}, fixtures::prior({1}, {1}));
        const auto crit = theorem4_criterion(model);
        CHECK(crit.trace_terms[0] == 0.0);
        CHECK(crit.min_lhs == 0.0);
        CHECK(crit.verdict == Verdict::pass);
    }
    SUBCASE("empty interval for s") {
        const auto model = fixtures::one_way(2, 2, VectorXi::Zero(4), fixtures::prior({-1.0}, {1.0}));
        const auto crit = theorem4_criterion(model);
        CHECK(crit.verdict == Verdict::fail);
        CHECK(crit.grid.empty());
        CHECK(crit.detail.find("empty") != std::string::npos);
    }
    SUBCASE("grid points strictly inside (0, min(1, s~))") {
        const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({-0.25, -0.25}, {0, 0}));
        const auto crit = theorem4_criterion(model, 50);
        CHECK(crit.s_tilde == doctest::Approx(0.75));
        CHECK(crit.grid.size() == 50);
        for (const auto& [s, lhs] : crit.grid) {
            CHECK(s > 0.0);
            CHECK(s < 0.75);
        }
    }
}

TEST_CASE("theorem4 LHS is smooth on the grid") {
    RandomStream rng(35);
    for (int rep = 0; rep < 20; ++rep) {
        const auto model = fixtures::random_model(rng, 24, 1, {fixtures::random_int(rng, 2, 4), fixtures::random_int(rng, 2, 4)},
                                                  0.5 + 2.0 * rng.uniform(), 1.0);
        const auto crit = theorem4_criterion(model, 100);
        for (std::size_t k = 1; k < crit.grid.size(); ++k)
            CHECK(std::abs(crit.grid[k].second - crit.grid[k - 1].second) < 0.1);
    }
}

TEST_CASE("geometric ergodicity") {
    SUBCASE("full-rank W via theorem 2") {
        const auto report = check_geometric_ergodicity(full_rank_model(-0.5, 0.0));
        CHECK(report.theorem_path == 2);
        CHECK(report.overall == ErgodicityOverall::geometric);
    }
    SUBCASE("two-way example via theorem 4") {
        const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({1.5, 1.5}, {1, 1}));
        const auto report = check_geometric_ergodicity(model);
        CHECK(report.theorem_path == 4);
        REQUIRE(report.criterion.has_value());
        CHECK(report.criterion->trace_terms[0] == doctest::Approx(1.0));
        CHECK(report.criterion->trace_terms[1] == doctest::Approx(1.0));
        CHECK(report.criterion->min_lhs < 1.0);
        CHECK(report.overall == ErgodicityOverall::geometric);
    }
    SUBCASE("all-ones response") {
        const auto model = fixtures::two_way(3, 2, VectorXi::Ones(6), fixtures::prior({1.5, 1.5}, {1, 1}));
        CHECK(check_geometric_ergodicity(model).overall == ErgodicityOverall::not_established);
        CHECK(check_geometric_ergodicity(full_rank_model(-0.5, 0.0)).overall == ErgodicityOverall::geometric);
    }
    SUBCASE("forcing theorem 2 on a rank-deficient W") {
        const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({1.5, 1.5}, {1, 1}));
        const auto report = check_geometric_ergodicity(model, ErgodicityPath::theorem2);
        CHECK(report.theorem_path == 2);
        CHECK(report.find("A1")->verdict == Verdict::fail);
        CHECK(report.overall == ErgodicityOverall::not_established);
    }
    SUBCASE("reports are pure functions of the inputs") {
        const auto model = fixtures::two_way(3, 2, two_way_y(), fixtures::prior({1.5, 1.5}, {1, 1}));
        const auto a = check_geometric_ergodicity(model, ErgodicityPath::automatic, 77);
        const auto b = check_geometric_ergodicity(model, ErgodicityPath::automatic, 77);
        CHECK(a.criterion->grid == b.criterion->grid);
        REQUIRE(a.conditions.size() == b.conditions.size());
        for (std::size_t k = 0; k < a.conditions.size(); ++k) CHECK(a.conditions[k].detail == b.conditions[k].detail);
    }
}
