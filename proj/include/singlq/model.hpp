#pragma once

// The LQ problem object (A, B, Pi), its Popov factorization, the input-space
// split along im R / ker R, the deflected data after the preliminary
// feedback u = -R^+ S^T x, and the X-dependent bundle (Q_X, S_X, K_X, A_X, Pi_X).

#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "singlq/matlib.hpp"

namespace singlq {

/// Relative asymmetry above which Q or R are rejected instead of symmetrized.
inline constexpr double kAsymmetryLimit = 1e-6;

/// Validated problem data. Construct with validate_problem().
class Problem {
 public:
  Index n() const { return A_.rows(); }
  Index m() const { return B_.cols(); }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& Q() const { return Q_; }
  const Matrix& S() const { return S_; }
  const Matrix& R() const { return R_; }

  /// Pi = [[Q, S], [S^T, R]].
  const Matrix& popov() const { return popov_; }
  const Matrix& R_pinv() const { return R_pinv_; }
  /// G = I - R^+ R, the orthogonal projector onto ker R.
  const Matrix& G() const { return G_; }
  const Tolerances& tolerances() const { return tol_; }
  Index rank_R() const { return rank_R_; }

  double popov_norm() const { return popov_norm_; }

 private:
  Problem() = default;
  friend Problem validate_problem(const Matrix&, const Matrix&, const Matrix&, const Matrix&,
                                  const Matrix&, const Tolerances&);

  Matrix A_, B_, Q_, S_, R_;
  Matrix popov_, R_pinv_, G_;
  Tolerances tol_;
  Index rank_R_ = 0;
  double popov_norm_ = 0.0;
};

namespace detail {

inline void require_shape(const Matrix& M, Index rows, Index cols, std::string_view name) {
  if (M.rows() != rows || M.cols() != cols) {
    std::ostringstream os;
    os << name << " must be " << rows << "x" << cols << ", got " << M.rows() << "x" << M.cols();
    throw DimensionError(os.str());
  }
}

inline Matrix checked_symmetric(const Matrix& M, std::string_view name) {
  const double asym = (M - M.transpose()).norm();
  if (asym > kAsymmetryLimit * std::max(1.0, M.norm())) {
    std::ostringstream os;
    os << name << " is not symmetric (asymmetry " << asym << ")";
    throw ValidationError(os.str());
  }
  return symmetrized(M);
}

inline Matrix assemble_popov(const Matrix& Q, const Matrix& S, const Matrix& R) {
  const Index n = Q.rows(), m = R.rows();
  Matrix Pi(n + m, n + m);
  Pi << Q, S, S.transpose(), R;
  return Pi;
}

}  // namespace detail

/// Checks dimensions, finiteness, symmetry and Pi >= 0; symmetrizes Q and R.
inline Problem validate_problem(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& S,
                                const Matrix& R, const Tolerances& tol = {}) {
  tol.validate();
  require_square(A, "A");
  const Index n = A.rows();
  if (n < 1) throw DimensionError("state dimension n must be at least 1");
  if (B.rows() != n) {
    std::ostringstream os;
    os << "B must have " << n << " rows, got " << B.rows();
    throw DimensionError(os.str());
  }
  const Index m = B.cols();
  if (m < 1) throw DimensionError("input dimension m must be at least 1");
  detail::require_shape(Q, n, n, "Q");
  detail::require_shape(S, n, m, "S");
  detail::require_shape(R, m, m, "R");
  require_finite(A, "A");
  require_finite(B, "B");
  require_finite(Q, "Q");
  require_finite(S, "S");
  require_finite(R, "R");

  Problem P;
  P.A_ = A;
  P.B_ = B;
  P.Q_ = detail::checked_symmetric(Q, "Q");
  P.S_ = S;
  P.R_ = detail::checked_symmetric(R, "R");
  P.tol_ = tol;
  P.popov_ = detail::assemble_popov(P.Q_, P.S_, P.R_);
  P.popov_norm_ = norm2(P.popov_);

  const double lambda_min = min_eigenvalue(P.popov_);
  if (lambda_min < -tol.psd_tol * std::max(1.0, P.popov_norm_)) {
    std::ostringstream os;
    os << "Popov matrix indefinite: lambda_min = " << lambda_min;
    throw ValidationError(os.str());
  }

  P.R_pinv_ = symmetrized(pseudo_inverse(P.R_, tol));
  // G is built from a kernel basis so that it is exactly zero for invertible R.
  const Subspace kerR = orthonormal_kernel(P.R_, tol);
  P.G_ = kerR.basis() * kerR.basis().transpose();
  P.rank_R_ = m - kerR.dim();

  // Implied by Pi >= 0; tested with a square-root slack since a PSD
  // perturbation of size eps allows off-diagonal blocks of size sqrt(eps).
  const double leak = norm2(P.S_ * P.G_);
  if (leak > std::sqrt(std::max(tol.psd_tol, tol.rank_tol)) * std::max(1.0, P.popov_norm_)) {
    std::ostringstream os;
    os << "ker R is not contained in ker S (|S G| = " << leak << ")";
    throw ValidationError(os.str());
  }
  return P;
}

/// Pi = [C D]^T [C D] with [C D] of full row rank p.
struct PopovFactorization {
  Matrix C;
  Matrix D;
  Index p() const { return C.rows(); }
};

/// Eigen-decomposition based factor with descending eigenvalues; each row is
/// sqrt(lambda_i) v_i^T with the largest-magnitude entry of v_i made positive.
inline PopovFactorization factor_popov(const Problem& P) {
  const Index n = P.n(), m = P.m();
  Eigen::SelfAdjointEigenSolver<Matrix> es(P.popov());
  const Vector& lambda = es.eigenvalues();
  const double lambda_max = std::max(0.0, lambda(lambda.size() - 1));
  const double cutoff = P.tolerances().rank_tol * lambda_max;

  std::vector<Index> kept;
  for (Index i = lambda.size() - 1; i >= 0; --i) {
    if (lambda(i) > cutoff && lambda(i) > 0.0) kept.push_back(i);
  }
  const Index p = static_cast<Index>(kept.size());
  Matrix rows(p, n + m);
  for (Index k = 0; k < p; ++k) {
    Vector v = es.eigenvectors().col(kept[static_cast<std::size_t>(k)]);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    rows.row(k) = std::sqrt(lambda(kept[static_cast<std::size_t>(k)])) * v.transpose();
  }
  return {rows.leftCols(n), rows.rightCols(m)};
}

/// Accepts a user-supplied factor after checking it reproduces Pi.
inline PopovFactorization make_factorization(const Problem& P, Matrix C, Matrix D) {
  if (C.cols() != P.n() || D.cols() != P.m() || C.rows() != D.rows()) {
    throw DimensionError("factorization blocks have incompatible shapes");
  }
  Matrix CD(C.rows(), P.n() + P.m());
  CD << C, D;
  const double err = (CD.transpose() * CD - P.popov()).norm();
  if (err > 1e-8 * (1.0 + P.popov().norm())) {
    throw ValidationError("[C D]^T [C D] does not reproduce the Popov matrix");
  }
  return {std::move(C), std::move(D)};
}

/// Input basis T = [T1 | T2] with im T1 = im R and im T2 = ker R.
struct InputSplit {
  Matrix T1, T2;
  Matrix B1, B2;
  Matrix D1;
  Matrix G;
  Index r = 0;
};

inline InputSplit input_split(const Problem& P, const PopovFactorization& fact) {
  const Index m = P.m();
  Eigen::SelfAdjointEigenSolver<Matrix> es(P.R());
  const Vector& lambda = es.eigenvalues();
  const double cutoff = P.tolerances().rank_tol * std::max(0.0, lambda(m - 1));
  Index r = 0;
  for (Index i = 0; i < m; ++i) {
    if (lambda(i) > cutoff && lambda(i) > 0.0) ++r;
  }
  // Eigenvalues are ascending: the last r eigenvectors span im R.
  InputSplit split;
  split.r = r;
  split.T1 = es.eigenvectors().rightCols(r).rowwise().reverse();
  split.T2 = es.eigenvectors().leftCols(m - r);
  split.B1 = P.B() * split.T1;
  split.B2 = P.B() * split.T2;
  split.D1 = fact.D * split.T1;
  split.G = P.G();
  return split;
}

/// The bundle associated with a symmetric X.
struct AssociatedData {
  Matrix QX, SX, KX, AX, PiX;
};

inline void require_symmetric(const Matrix& X, Index n, std::string_view name) {
  detail::require_shape(X, n, n, name);
  require_finite(X, name);
  if ((X - X.transpose()).norm() > 1e-8 * (1.0 + X.norm())) {
    throw ValidationError(std::string(name) + " is not symmetric");
  }
}

inline AssociatedData associated(const Matrix& X, const Problem& P) {
  require_symmetric(X, P.n(), "X");
  AssociatedData d;
  d.QX = P.Q() + P.A().transpose() * X + X * P.A();
  d.SX = P.S() + X * P.B();
  d.KX = P.R_pinv() * d.SX.transpose();
  d.AX = P.A() - P.B() * d.KX;
  d.PiX = detail::assemble_popov(d.QX, d.SX, P.R());
  return d;
}

/// Data after the preliminary feedback u = -R^+ S^T x + v.
struct DeflectedSystem {
  Matrix A0, Q0, C0;
};

inline DeflectedSystem deflected(const Problem& P, const PopovFactorization& fact) {
  const Matrix RS = P.R_pinv() * P.S().transpose();
  DeflectedSystem d;
  d.A0 = P.A() - P.B() * RS;
  d.Q0 = symmetrized(P.Q() - P.S() * RS);
  d.C0 = fact.C - fact.D * RS;
  const double lambda_min = min_eigenvalue(d.Q0);
  if (lambda_min < -P.tolerances().psd_tol * std::max(1.0, P.popov_norm())) {
    std::ostringstream os;
    os << "internal inconsistency: deflected weight Q0 has eigenvalue " << lambda_min;
    throw Error(os.str());
  }
  return d;
}

}  // namespace singlq
