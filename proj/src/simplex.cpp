#include "probitmm/conditions.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace probitmm {

using Eigen::Index;

namespace {

constexpr double pivot_eps = 1e-11;

// Dense tableau for min c^T x s.t. A x = b, x >= 0, b >= 0, with one artificial per row.
// Column layout: [x (nx) | artificials (m) | rhs].
class Tableau {
public:
    Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b)
        : m_(A.rows()), nx_(A.cols()), T_(Eigen::MatrixXd::Zero(A.rows() + 1, A.cols() + A.rows() + 1)),
          basis_(static_cast<std::size_t>(A.rows())), active_(static_cast<std::size_t>(A.rows()), true) {
        T_.topLeftCorner(m_, nx_) = A;
        T_.block(0, nx_, m_, m_).setIdentity();
        T_.col(rhs()).head(m_) = b;
        for (Index i = 0; i < m_; ++i) basis_[static_cast<std::size_t>(i)] = nx_ + i;
    }

    Index rhs() const { return nx_ + m_; }
    Index obj() const { return m_; }

    // Sets the objective row to reduced costs of cost vector c over all columns.
    void set_objective(const Eigen::VectorXd& c) {
        T_.row(obj()).setZero();
        T_.row(obj()).head(c.size()) = c.transpose();
        for (Index i = 0; i < m_; ++i) {
            if (!active_[static_cast<std::size_t>(i)]) continue;
            const Index bi = basis_[static_cast<std::size_t>(i)];
            const double cb = bi < c.size() ? c[bi] : 0.0;
            if (cb != 0.0) T_.row(obj()) -= cb * T_.row(i);
        }
    }

    // Bland's rule; entering columns limited to [0, ncols). Returns false if the cap was hit.
    bool optimize(Index ncols, Index& iterations, Index cap) {
        for (;;) {
            Index enter = -1;
            for (Index j = 0; j < ncols; ++j) {
                if (T_(obj(), j) < -pivot_eps) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return true;

            Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < m_; ++i) {
                if (!active_[static_cast<std::size_t>(i)] || T_(i, enter) <= pivot_eps) continue;
                const double ratio = T_(i, rhs()) / T_(i, enter);
                if (leave < 0 || ratio < best - 1e-14 ||
                    (std::abs(ratio - best) <= 1e-14 && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
                    best = ratio;
                    leave = i;
                }
            }
            // Bounded below by zero in both phases, so an unbounded ray cannot occur.
            if (leave < 0) return true;
            if (iterations >= cap) return false;
            pivot(leave, enter);
            ++iterations;
        }
    }

    void pivot(Index row, Index col) {
        T_.row(row) /= T_(row, col);
        for (Index i = 0; i <= m_; ++i) {
            if (i == row) continue;
            const double f = T_(i, col);
            if (f != 0.0) T_.row(i) -= f * T_.row(row);
        }
        basis_[static_cast<std::size_t>(row)] = col;
    }

    // Pivots remaining artificials out of the basis; rows where that is impossible are
    // redundant constraints and are deactivated.
    void expel_artificials() {
        for (Index i = 0; i < m_; ++i) {
            if (basis_[static_cast<std::size_t>(i)] < nx_) continue;
            Index col = -1;
            double big = pivot_eps;
            for (Index j = 0; j < nx_; ++j) {
                if (std::abs(T_(i, j)) > big) {
                    big = std::abs(T_(i, j));
                    col = j;
                }
            }
            if (col >= 0) pivot(i, col);
            else active_[static_cast<std::size_t>(i)] = false;
        }
    }

    double objective_value() const { return -T_(obj(), rhs()); }

    std::vector<Index> basic_columns() const {
        std::vector<Index> cols;
        for (Index i = 0; i < m_; ++i)
            if (active_[static_cast<std::size_t>(i)]) cols.push_back(basis_[static_cast<std::size_t>(i)]);
        return cols;
    }

    Eigen::VectorXd solution() const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(nx_);
        for (Index i = 0; i < m_; ++i) {
            const Index bi = basis_[static_cast<std::size_t>(i)];
            if (active_[static_cast<std::size_t>(i)] && bi < nx_) x[bi] = std::max(T_(i, rhs()), 0.0);
        }
        return x;
    }

private:
    Index m_;
    Index nx_;
    Eigen::MatrixXd T_;
    std::vector<Index> basis_;
    std::vector<bool> active_;
};

} // namespace

bool check_full_rank(const Eigen::MatrixXd& M, double tol) { return numerical_rank(M, tol) == M.cols(); }

LPResult check_positive_null_vector(const Eigen::MatrixXd& Wstar, Index max_iterations) {
    const Index n = Wstar.rows();
    const Index cols = Wstar.cols();
    const Index cap = max_iterations > 0 ? max_iterations : 10 * (n + cols);
    LPResult result;
    if (n == 0) return result;

    // e = 1 + s with s >= 0:  Wstar^T s = -Wstar^T 1.
    Eigen::MatrixXd A = Wstar.transpose();
    Eigen::VectorXd b = -(A * Eigen::VectorXd::Ones(n));
    for (Index i = 0; i < cols; ++i) {
        if (b[i] < 0.0) {
            A.row(i) *= -1.0;
            b[i] = -b[i];
        }
    }

    Tableau tab(A, b);
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + cols);
    phase1.tail(cols).setOnes();
    tab.set_objective(phase1);
    if (!tab.optimize(n + cols, result.iterations, cap)) return result;

    const double scale = std::max(1.0, b.lpNorm<1>());
    if (tab.objective_value() > 1e-9 * scale) {
        result.status = LPStatus::infeasible;
        return result;
    }

    tab.expel_artificials();
    tab.set_objective(Eigen::VectorXd::Ones(n));
    if (!tab.optimize(n, result.iterations, cap)) return result;

    Eigen::VectorXd s = tab.solution();

    // Re-solve the basic system against the original data to shed accumulated pivot error.
    const auto basic = tab.basic_columns();
    if (!basic.empty()) {
        Eigen::MatrixXd AB(cols, static_cast<Index>(basic.size()));
        for (std::size_t k = 0; k < basic.size(); ++k) AB.col(static_cast<Index>(k)) = A.col(basic[k]);
        const Eigen::VectorXd sb = AB.colPivHouseholderQr().solve(b);
        if (sb.allFinite() && (sb.array() >= -1e-9).all()) {
            s.setZero();
            for (std::size_t k = 0; k < basic.size(); ++k) s[basic[k]] = std::max(sb[static_cast<Index>(k)], 0.0);
        }
    }

    Eigen::VectorXd e = Eigen::VectorXd::Ones(n) + s;
    result.residual = (Wstar.transpose() * e).lpNorm<Eigen::Infinity>();
    const double tol = 1e-8 * std::max(Wstar.norm(), std::numeric_limits<double>::min());
    if (result.residual < tol) {
        result.status = LPStatus::feasible;
        result.witness_e = std::move(e);
    }
    return result;
}

} // namespace probitmm
