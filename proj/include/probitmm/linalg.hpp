#pragma once

#include "probitmm/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace probitmm {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Numerical failure in a factorization (non-symmetric input, loss of definiteness, ...).
class LinalgError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An eigenvalue counts as nonzero when it exceeds this multiple of the largest one.
inline constexpr double rank_tolerance = 1e-10;
/// PSD verdicts accept a smallest eigenvalue down to -psd_tolerance * (matrix scale).
inline constexpr double psd_tolerance = 1e-8;

/// Spectral factorization A = U^T diag(lambda) U. Rows of U are eigenvectors; lambda is sorted
/// in descending order. rank counts |lambda_j| > tol * max(max |lambda|, reference), where
/// reference is the magnitude of the quantities A was computed from (0 when A is exact).
template <typename Scalar = double>
struct EigenDecomposition {
    Mat<Scalar> U;
    Vec<Scalar> lambda;
    Eigen::Index rank = 0;
    Scalar lambda_max = 0;
    Scalar tol = Scalar(rank_tolerance);
    Scalar reference = 0;

    Eigen::Index size() const { return lambda.size(); }
    bool nonzero(Eigen::Index j) const {
        const Scalar scale = std::max(lambda.size() ? lambda.cwiseAbs().maxCoeff() : Scalar(0), reference);
        return std::abs(lambda[j]) > tol * scale && lambda[j] != Scalar(0);
    }
    Mat<Scalar> reconstruct() const { return U.transpose() * lambda.asDiagonal() * U; }
};

template <typename Derived>
typename Derived::Scalar max_abs(const Eigen::MatrixBase<Derived>& A) {
    return A.size() ? A.cwiseAbs().maxCoeff() : typename Derived::Scalar(0);
}

/// Symmetric eigendecomposition. With require_psd set, eigenvalues below
/// -psd_tol * lambda_max raise LinalgError. Pass reference when A carries cancellation error,
/// e.g. Z^T (I - P_X) Z with reference |Z^T Z|: a matrix that is zero up to roundoff then has
/// rank 0 instead of rank 1.
template <typename Derived>
EigenDecomposition<typename Derived::Scalar> sym_eigen(const Eigen::MatrixBase<Derived>& A,
                                                       typename Derived::Scalar tol = rank_tolerance,
                                                       bool require_psd = false,
                                                       typename Derived::Scalar psd_tol = psd_tolerance,
                                                       typename Derived::Scalar reference = 0) {
    using Scalar = typename Derived::Scalar;
    if (A.rows() != A.cols()) throw LinalgError("sym_eigen: matrix is not square");
    const Scalar scale = std::max(Scalar(1), max_abs(A));
    if (max_abs(A - A.transpose()) > Scalar(1e-10) * scale) throw LinalgError("sym_eigen: matrix is not symmetric");

    EigenDecomposition<Scalar> out;
    out.tol = tol;
    out.reference = reference;
    const Eigen::Index m = A.rows();
    if (m == 0) return out;

    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(A.eval());
    if (solver.info() != Eigen::Success) throw LinalgError("sym_eigen: eigensolver did not converge");

    // Eigen sorts ascending with eigenvectors in columns; flip to descending rows.
    out.lambda = solver.eigenvalues().reverse();
    out.U = solver.eigenvectors().rowwise().reverse().transpose();
    out.lambda_max = out.lambda[0];

    const Scalar cut = tol * std::max(out.lambda.cwiseAbs().maxCoeff(), reference);
    for (Eigen::Index j = 0; j < m; ++j)
        if (std::abs(out.lambda[j]) > cut && out.lambda[j] != Scalar(0)) ++out.rank;

    if (require_psd && out.lambda[m - 1] < -psd_tol * std::max(out.lambda_max, Scalar(0)))
        throw LinalgError("sym_eigen: matrix declared PSD has eigenvalue " + std::to_string(double(out.lambda[m - 1])));
    return out;
}

/// Moore-Penrose inverse U^T Lambda^+ U, with 1/lambda_j kept only for nonzero eigenvalues.
template <typename Scalar>
Mat<Scalar> pseudo_inverse(const EigenDecomposition<Scalar>& E) {
    Vec<Scalar> inv = Vec<Scalar>::Zero(E.size());
    for (Eigen::Index j = 0; j < E.size(); ++j)
        if (E.nonzero(j)) inv[j] = Scalar(1) / E.lambda[j];
    return E.U.transpose() * inv.asDiagonal() * E.U;
}

/// Orthogonal projector onto the column space of the decomposed matrix.
template <typename Scalar>
Mat<Scalar> projection_colspace(const EigenDecomposition<Scalar>& E) {
    Mat<Scalar> P = Mat<Scalar>::Zero(E.size(), E.size());
    for (Eigen::Index j = 0; j < E.size(); ++j)
        if (E.nonzero(j)) P.noalias() += E.U.row(j).transpose() * E.U.row(j);
    return P;
}

/// Count of singular values above tol * sigma_max.
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& M, typename Derived::Scalar tol = rank_tolerance) {
    using Scalar = typename Derived::Scalar;
    if (M.size() == 0) return 0;
    Eigen::BDCSVD<Mat<Scalar>> svd(M.eval());
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[0] == Scalar(0)) return 0;
    return (sv.array() > tol * sv[0]).count();
}

/// P_X = X (X^T X)^{-1} X^T. Throws LinalgError when X is not of full column rank.
template <typename Derived>
Mat<typename Derived::Scalar> projection_X(const Eigen::MatrixBase<Derived>& X) {
    using Scalar = typename Derived::Scalar;
    if (numerical_rank(X) != X.cols()) throw LinalgError("projection_X: X is rank deficient");
    const Mat<Scalar> XtX = X.transpose() * X;
    Eigen::LLT<Mat<Scalar>> llt(XtX);
    if (llt.info() != Eigen::Success) throw LinalgError("projection_X: X^T X is not positive definite");
    Mat<Scalar> P = X * llt.solve(X.transpose());
    return (P + P.transpose()) / Scalar(2);
}

/// Spectral norm of a symmetric matrix.
template <typename Derived>
typename Derived::Scalar sym_norm(const Eigen::MatrixBase<Derived>& M) {
    using Scalar = typename Derived::Scalar;
    if (M.size() == 0) return Scalar(0);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(M.eval(), Eigen::EigenvaluesOnly);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// True when the smallest eigenvalue of symmetric M is >= -tol * scale.
template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& M, typename Derived::Scalar scale,
            typename Derived::Scalar tol = psd_tolerance, typename Derived::Scalar* min_eig = nullptr) {
    using Scalar = typename Derived::Scalar;
    if (M.size() == 0) return true;
    const Mat<Scalar> sym = (M + M.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(sym, Eigen::EigenvaluesOnly);
    const Scalar smallest = solver.eigenvalues()[0];
    if (min_eig) *min_eig = smallest;
    return smallest >= -tol * std::max(scale, Scalar(1e-300));
}

/// Fixed cross-products of a design (X | Z), computed once per model and reused by every
/// iteration of a chain. ZtPZ is Z^T (I - P_X) Z; R = (X^T X)^{-1} X^T Z.
template <typename Scalar = double>
struct DesignGram {
    Mat<Scalar> X;
    Mat<Scalar> Z;
    std::vector<Eigen::Index> q;
    std::vector<Eigen::Index> offsets;

    Mat<Scalar> XtX;
    Mat<Scalar> XtX_inv;
    Mat<Scalar> XtZ;
    Mat<Scalar> ZtZ;
    Mat<Scalar> R;
    Mat<Scalar> ZtPZ;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index p() const { return X.cols(); }
    Eigen::Index total_q() const { return Z.cols(); }
    Eigen::Index r() const { return static_cast<Eigen::Index>(q.size()); }

    /// W = (X | Z), materialized on demand.
    Mat<Scalar> W() const {
        Mat<Scalar> out(n(), p() + total_q());
        out << X, Z;
        return out;
    }
    /// W^T v without forming W.
    Vec<Scalar> Wt_times(const Vec<Scalar>& v) const {
        Vec<Scalar> out(p() + total_q());
        out.head(p()).noalias() = X.transpose() * v;
        out.tail(total_q()).noalias() = Z.transpose() * v;
        return out;
    }
    /// (I - P_X) v.
    Vec<Scalar> residual_X(const Vec<Scalar>& v) const { return v - X * (XtX_inv * (X.transpose() * v)); }
};

template <typename DX, typename DZ>
DesignGram<typename DX::Scalar> make_gram(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DZ>& Z,
                                          const std::vector<Eigen::Index>& q) {
    using Scalar = typename DX::Scalar;
    if (X.rows() != Z.rows()) throw LinalgError("make_gram: X and Z row counts differ");
    DesignGram<Scalar> g;
    g.X = X;
    g.Z = Z;
    g.q = q;
    Eigen::Index offset = 0;
    for (auto qj : q) {
        g.offsets.push_back(offset);
        offset += qj;
    }
    if (offset != Z.cols()) throw LinalgError("make_gram: block sizes do not match Z");
    if (numerical_rank(X) != X.cols()) throw LinalgError("make_gram: X is rank deficient");

    g.XtX = X.transpose() * X;
    Eigen::LLT<Mat<Scalar>> llt(g.XtX);
    if (llt.info() != Eigen::Success) throw LinalgError("make_gram: X^T X is not positive definite");
    g.XtX_inv = llt.solve(Mat<Scalar>::Identity(X.cols(), X.cols()));
    g.XtX_inv = (g.XtX_inv + g.XtX_inv.transpose()).eval() / Scalar(2);
    g.XtZ = X.transpose() * Z;
    g.ZtZ = Z.transpose() * Z;
    g.R = llt.solve(g.XtZ);
    g.ZtPZ = g.ZtZ - g.XtZ.transpose() * g.R;
    g.ZtPZ = (g.ZtPZ + g.ZtPZ.transpose()).eval() / Scalar(2);
    return g;
}

inline DesignGram<double> make_gram(const ProbitMixedModel& model) {
    return make_gram(model.X(), model.Z(), model.re().q);
}

/// Posterior precision of eta = (beta, u) given (v, tau):
/// Sigma = [[X^T X, X^T Z], [Z^T X, Z^T Z + D(tau)]], with D(tau) = diag(tau_j I_{q_j}) stored
/// as its diagonal, and S(tau) = Z^T (I - P_X) Z + D(tau).
template <typename Scalar = double>
struct PosteriorPrecision {
    Mat<Scalar> sigma;
    Mat<Scalar> S_tau;
    Mat<Scalar> R_mat;
    Vec<Scalar> D_tau;
    Mat<Scalar> XtX_inv;

    Eigen::Index p() const { return XtX_inv.rows(); }
    Eigen::Index q() const { return S_tau.rows(); }
};

template <typename Scalar>
Vec<Scalar> expand_tau(const DesignGram<Scalar>& g, const Vec<Scalar>& tau) {
    if (tau.size() != g.r()) throw LinalgError("tau has the wrong length");
    Vec<Scalar> d(g.total_q());
    for (Eigen::Index j = 0; j < g.r(); ++j) d.segment(g.offsets[j], g.q[j]).setConstant(tau[j]);
    return d;
}

template <typename Scalar>
PosteriorPrecision<Scalar> build_precision(const DesignGram<Scalar>& g, const Vec<Scalar>& tau) {
    if (!(tau.array() > Scalar(0)).all() || !tau.allFinite()) throw LinalgError("build_precision: tau must be positive");
    PosteriorPrecision<Scalar> pp;
    pp.D_tau = expand_tau(g, tau);
    const Eigen::Index p = g.p();
    const Eigen::Index q = g.total_q();
    pp.sigma.resize(p + q, p + q);
    pp.sigma.topLeftCorner(p, p) = g.XtX;
    pp.sigma.topRightCorner(p, q) = g.XtZ;
    pp.sigma.bottomLeftCorner(q, p) = g.XtZ.transpose();
    pp.sigma.bottomRightCorner(q, q) = g.ZtZ;
    pp.sigma.bottomRightCorner(q, q).diagonal() += pp.D_tau;
    pp.S_tau = g.ZtPZ;
    pp.S_tau.diagonal() += pp.D_tau;
    pp.R_mat = g.R;
    pp.XtX_inv = g.XtX_inv;
    return pp;
}

inline PosteriorPrecision<double> build_precision(const ProbitMixedModel& model, const Eigen::VectorXd& tau) {
    return build_precision(make_gram(model), tau);
}

template <typename Scalar>
Mat<Scalar> S_inverse(const PosteriorPrecision<Scalar>& pp) {
    const Eigen::Index q = pp.q();
    if (q == 0) return Mat<Scalar>(0, 0);
    Eigen::LLT<Mat<Scalar>> llt(pp.S_tau);
    if (llt.info() != Eigen::Success) throw LinalgError("S(tau) is not positive definite");
    Mat<Scalar> inv = llt.solve(Mat<Scalar>::Identity(q, q));
    return (inv + inv.transpose()) / Scalar(2);
}

/// Sigma^{-1} assembled blockwise:
/// [[(X^T X)^{-1} + R S^{-1} R^T, -R S^{-1}], [-S^{-1} R^T, S^{-1}]].
template <typename Scalar>
Mat<Scalar> sigma_inverse(const PosteriorPrecision<Scalar>& pp) {
    const Eigen::Index p = pp.p();
    const Eigen::Index q = pp.q();
    const Mat<Scalar> Sinv = S_inverse(pp);
    const Mat<Scalar> RSinv = pp.R_mat * Sinv;
    Mat<Scalar> out(p + q, p + q);
    out.topLeftCorner(p, p) = pp.XtX_inv + RSinv * pp.R_mat.transpose();
    out.topRightCorner(p, q) = -RSinv;
    out.bottomLeftCorner(q, p) = -RSinv.transpose();
    out.bottomRightCorner(q, q) = Sinv;
    return out;
}

/// Sigma^{-1} W^T v via the block form: the u-part is S^{-1} Z^T (I - P_X) v and the beta-part
/// is (X^T X)^{-1} X^T (v - Z u-part).
template <typename Scalar>
Vec<Scalar> conditional_mean(const PosteriorPrecision<Scalar>& pp, const DesignGram<Scalar>& g, const Vec<Scalar>& v) {
    if (v.size() != g.n()) throw LinalgError("conditional_mean: v has the wrong length");
    Vec<Scalar> out(g.p() + g.total_q());
    Vec<Scalar> u_part = Vec<Scalar>::Zero(g.total_q());
    if (g.total_q() > 0) {
        Eigen::LLT<Mat<Scalar>> llt(pp.S_tau);
        if (llt.info() != Eigen::Success) throw LinalgError("S(tau) is not positive definite");
        u_part = llt.solve(g.Z.transpose() * g.residual_X(v));
    }
    out.tail(g.total_q()) = u_part;
    out.head(g.p()) = g.XtX_inv * (g.X.transpose() * (v - g.Z * u_part));
    return out;
}

/// M1 = I - W Sigma^{-1} W^T.
template <typename DW, typename DS>
Mat<typename DW::Scalar> m1_matrix(const Eigen::MatrixBase<DW>& W, const Eigen::MatrixBase<DS>& sigma_inv) {
    using Scalar = typename DW::Scalar;
    Mat<Scalar> M = Mat<Scalar>::Identity(W.rows(), W.rows());
    M.noalias() -= W * sigma_inv * W.transpose();
    return (M + M.transpose()) / Scalar(2);
}

template <typename Scalar>
Mat<Scalar> m1_matrix(const PosteriorPrecision<Scalar>& pp, const DesignGram<Scalar>& g) {
    return m1_matrix(g.W(), sigma_inverse(pp));
}

/// v^T M1 v = v^T v - (W^T v)^T Sigma^{-1} W^T v, without forming the n x n matrix.
/// Clamped at zero against cancellation.
template <typename Scalar>
Scalar m1_quadratic_form(const PosteriorPrecision<Scalar>& pp, const DesignGram<Scalar>& g, const Vec<Scalar>& v) {
    const Vec<Scalar> mean = conditional_mean(pp, g, v);
    const Scalar value = v.squaredNorm() - mean.dot(g.Wt_times(v));
    return std::max(value, Scalar(0));
}

template <typename Scalar = double>
struct Lemma1Result {
    bool first = false;  // S^{-1} <= (Z^T(I-P_X)Z)^+ + (sum_j 1/tau_j)(I - P)
    bool second = false; // (R_j S^{-1} R_j^T)^{-1} <= (lambda_max + tau_j) I, every j
    Scalar min_eig_first = 0;
    Scalar min_eig_second = 0;
};

/// Checks the two Loewner-order bounds on S(tau)^{-1} for an explicit S, so that the checker
/// itself can be exercised on perturbed inputs.
template <typename Scalar>
Lemma1Result<Scalar> lemma1_check(const Mat<Scalar>& S_tau, const DesignGram<Scalar>& g, const Vec<Scalar>& tau,
                                  Scalar tol = psd_tolerance) {
    Lemma1Result<Scalar> out;
    const Eigen::Index q = g.total_q();
    if (q == 0) {
        out.first = out.second = true;
        return out;
    }
    const auto E = sym_eigen(g.ZtPZ, Scalar(rank_tolerance), false, Scalar(psd_tolerance), max_abs(g.ZtZ));
    const Mat<Scalar> pinv = pseudo_inverse(E);
    const Mat<Scalar> proj = projection_colspace(E);
    const Scalar lambda_p = std::max(E.lambda_max, Scalar(0));

    Eigen::LLT<Mat<Scalar>> llt(S_tau);
    Mat<Scalar> Sinv;
    if (llt.info() == Eigen::Success) {
        Sinv = llt.solve(Mat<Scalar>::Identity(q, q));
    } else {
        Sinv = S_tau.completeOrthogonalDecomposition().pseudoInverse();
    }
    Sinv = (Sinv + Sinv.transpose()).eval() / Scalar(2);

    const Scalar inv_tau_sum = tau.cwiseInverse().sum();
    const Mat<Scalar> diff1 = pinv + inv_tau_sum * (Mat<Scalar>::Identity(q, q) - proj) - Sinv;
    const Scalar scale1 = sym_norm(pinv) + inv_tau_sum + sym_norm(Sinv);
    out.first = is_psd(diff1, scale1, tol, &out.min_eig_first);

    out.second = true;
    out.min_eig_second = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < g.r(); ++j) {
        const Mat<Scalar> block = Sinv.block(g.offsets[j], g.offsets[j], g.q[j], g.q[j]);
        Eigen::FullPivLU<Mat<Scalar>> lu(block);
        Scalar min_eig = -std::numeric_limits<Scalar>::infinity();
        bool ok = false;
        if (lu.isInvertible()) {
            const Mat<Scalar> inv = lu.inverse();
            const Mat<Scalar> diff2 = (lambda_p + tau[j]) * Mat<Scalar>::Identity(g.q[j], g.q[j]) - inv;
            const Scalar scale2 = lambda_p + tau[j] + sym_norm(inv);
            ok = is_psd(diff2, scale2, tol, &min_eig);
        }
        out.second = out.second && ok;
        out.min_eig_second = std::min(out.min_eig_second, min_eig);
    }
    return out;
}

template <typename Scalar>
Lemma1Result<Scalar> lemma1_check(const DesignGram<Scalar>& g, const Vec<Scalar>& tau, Scalar tol = psd_tolerance) {
    return lemma1_check(build_precision(g, tau).S_tau, g, tau, tol);
}

inline Lemma1Result<double> lemma1_check(const ProbitMixedModel& model, const Eigen::VectorXd& tau,
                                         double tol = psd_tolerance) {
    return lemma1_check(make_gram(model), tau, tol);
}

} // namespace probitmm
