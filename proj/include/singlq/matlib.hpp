#pragma once

/// Dense real-matrix primitives and subspace arithmetic.
///
/// Every routine here is a pure function of its arguments. Rank decisions
/// use a relative singular-value cutoff (`Tolerances::rank_tol`), and
/// subspaces always carry an orthonormal basis.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <lapacke.h>

namespace singlq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Raised by routines that require a Hurwitz matrix.
class NotHurwitzError : public Error {
 public:
  explicit NotHurwitzError(double abscissa)
      : Error(message(abscissa)), spectral_abscissa_(abscissa) {}

  double spectral_abscissa() const { return spectral_abscissa_; }

 private:
  static std::string message(double abscissa) {
    std::ostringstream os;
    os << "matrix is not Hurwitz: spectral abscissa = " << abscissa;
    return os.str();
  }

  double spectral_abscissa_;
};

struct Tolerances {
  /// Singular values below rank_tol * sigma_max count as zero.
  double rank_tol = 1e-9;
  /// Bound on matrix-equation residuals (scaled by the data norm by callers).
  double residual_tol = 1e-7;
  /// Slack allowed on the minimum eigenvalue of a PSD matrix.
  double psd_tol = 1e-9;

  void validate() const {
    if (!(rank_tol > 0) || !(residual_tol > 0) || !(psd_tol > 0)) {
      throw ValidationError("tolerances must be strictly positive");
    }
  }
};

/// Projection residual below which two subspaces are considered equal.
inline constexpr double kSubspaceTol = 1e-8;

inline bool all_finite(const Matrix& M) { return M.allFinite(); }

inline void require_finite(const Matrix& M, std::string_view name) {
  if (!M.allFinite()) {
    throw ValidationError("non-finite entry in " + std::string(name));
  }
}

inline void require_square(const Matrix& M, std::string_view name) {
  if (M.rows() != M.cols()) {
    std::ostringstream os;
    os << name << " must be square, got " << M.rows() << "x" << M.cols();
    throw DimensionError(os.str());
  }
}

inline Matrix symmetrized(const Matrix& M) { return 0.5 * (M + M.transpose()); }

/// Largest singular value; zero for empty matrices.
inline double norm2(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

/// Smallest eigenvalue of the symmetric part of M (+inf for empty).
inline double min_eigenvalue(const Matrix& M) {
  if (M.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double max_eigenvalue(const Matrix& M) {
  if (M.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

/// max Re(lambda) over the spectrum of A (-inf for the empty matrix).
inline double spectral_abscissa(const Matrix& A) {
  require_square(A, "A");
  if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

inline double spectral_radius(const Matrix& A) {
  require_square(A, "A");
  if (A.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {

// Count of singular values above the cutoff rank_tol * max(sigma_max, scale).
inline Index numerical_rank(const Vector& sv, double rank_tol, double scale) {
  if (sv.size() == 0) return 0;
  const double cutoff = rank_tol * std::max(sv(0), scale);
  Index r = 0;
  while (r < sv.size() && sv(r) > cutoff && sv(r) > 0.0) ++r;
  return r;
}

}  // namespace detail

/// Moore-Penrose pseudo-inverse via SVD with relative cutoff.
inline Matrix pseudo_inverse(const Matrix& M, const Tolerances& tol = {}) {
  Matrix result = Matrix::Zero(M.cols(), M.rows());
  if (M.size() == 0) return result;
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Index r = detail::numerical_rank(sv, tol.rank_tol, 0.0);
  for (Index i = 0; i < r; ++i) {
    result.noalias() += svd.matrixV().col(i) * (1.0 / sv(i)) * svd.matrixU().col(i).transpose();
  }
  return result;
}

class Subspace;
inline Subspace orthonormal_image(const Matrix& M, const Tolerances& tol = {}, double scale = 0.0);
inline Subspace orthonormal_kernel(const Matrix& M, const Tolerances& tol = {}, double scale = 0.0);

/// A linear subspace of R^ambient stored by an orthonormal basis.
class Subspace {
 public:
  Subspace() = default;

  static Subspace zero(Index ambient) { return Subspace(ambient, Matrix(ambient, 0)); }

  static Subspace full(Index ambient) {
    return Subspace(ambient, Matrix::Identity(ambient, ambient));
  }

  /// Wraps a basis that is already orthonormal (checked to 1e-10).
  static Subspace from_orthonormal(Matrix basis) {
    const Index k = basis.cols();
    if (k > basis.rows()) throw DimensionError("more basis vectors than ambient dimension");
    if (k > 0) {
      const double err = (basis.transpose() * basis - Matrix::Identity(k, k)).norm();
      if (err > 1e-10) throw ValidationError("basis is not orthonormal");
    }
    const Index ambient = basis.rows();
    return Subspace(ambient, std::move(basis));
  }

  Index ambient_dim() const { return ambient_; }
  Index dim() const { return basis_.cols(); }
  bool is_zero() const { return dim() == 0; }
  bool is_full() const { return dim() == ambient_; }
  const Matrix& basis() const { return basis_; }

  Matrix projector() const { return basis_ * basis_.transpose(); }

  /// Spectral norm of the component of V orthogonal to this subspace.
  double residual(const Matrix& V) const {
    if (V.rows() != ambient_) throw DimensionError("vector dimension mismatch");
    if (V.cols() == 0) return 0.0;
    const Matrix off = V - basis_ * (basis_.transpose() * V);
    return norm2(off);
  }

  bool contains(const Subspace& other, double tol = kSubspaceTol) const {
    if (other.ambient_ != ambient_) throw DimensionError("ambient dimension mismatch");
    return residual(other.basis_) <= tol;
  }

  bool contains_vectors(const Matrix& V, double tol = kSubspaceTol) const {
    return residual(V) <= tol;
  }

 private:
  Subspace(Index ambient, Matrix basis) : ambient_(ambient), basis_(std::move(basis)) {}

  friend Subspace orthonormal_image(const Matrix&, const Tolerances&, double);
  friend Subspace orthonormal_kernel(const Matrix&, const Tolerances&, double);

  Index ambient_ = 0;
  Matrix basis_ = Matrix(0, 0);
};

/// Equality as mutual containment.
inline bool equal(const Subspace& U, const Subspace& W, double tol = kSubspaceTol) {
  return U.dim() == W.dim() && U.contains(W, tol) && W.contains(U, tol);
}

/// im M. `scale` (when larger than sigma_max) sets the reference magnitude for
/// the rank cutoff; callers pass the norm of the unprojected operator so that
/// round-off residue is not mistaken for rank.
inline Subspace orthonormal_image(const Matrix& M, const Tolerances& tol, double scale) {
  const Index rows = M.rows();
  if (M.cols() == 0 || rows == 0) return Subspace(rows, Matrix(rows, 0));
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU);
  const Index r = detail::numerical_rank(svd.singularValues(), tol.rank_tol, scale);
  return Subspace(rows, svd.matrixU().leftCols(r));
}

/// ker M, with dim(ker M) + dim(im M) = cols(M) under the same cutoff.
inline Subspace orthonormal_kernel(const Matrix& M, const Tolerances& tol, double scale) {
  const Index cols = M.cols();
  if (cols == 0) return Subspace(0, Matrix(0, 0));
  if (M.rows() == 0) return Subspace(cols, Matrix::Identity(cols, cols));
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const Index r = detail::numerical_rank(svd.singularValues(), tol.rank_tol, scale);
  return Subspace(cols, svd.matrixV().rightCols(cols - r));
}

/// Orthogonal complement within the ambient space.
inline Subspace orthogonal_complement(const Subspace& U, const Tolerances& tol = {}) {
  if (U.is_zero()) return Subspace::full(U.ambient_dim());
  return orthonormal_kernel(U.basis().transpose(), tol, 1.0);
}

inline void require_same_ambient(const Subspace& U, const Subspace& W) {
  if (U.ambient_dim() != W.ambient_dim()) {
    std::ostringstream os;
    os << "ambient dimension mismatch: " << U.ambient_dim() << " vs " << W.ambient_dim();
    throw DimensionError(os.str());
  }
}

inline Subspace subspace_sum(const Subspace& U, const Subspace& W, const Tolerances& tol = {}) {
  require_same_ambient(U, W);
  Matrix joined(U.ambient_dim(), U.dim() + W.dim());
  joined << U.basis(), W.basis();
  return orthonormal_image(joined, tol, 1.0);
}

inline Subspace subspace_intersection(const Subspace& U, const Subspace& W, const Tolerances& tol = {}) {
  require_same_ambient(U, W);
  const Index n = U.ambient_dim();
  if (U.is_zero() || W.is_zero()) return Subspace::zero(n);
  // x lies in both iff both orthogonal residuals vanish.
  Matrix stacked(2 * n, n);
  stacked << Matrix::Identity(n, n) - U.projector(), Matrix::Identity(n, n) - W.projector();
  return orthonormal_kernel(stacked, tol, 1.0);
}

/// {x : M x in W}.
inline Subspace subspace_preimage(const Matrix& M, const Subspace& W, const Tolerances& tol = {}) {
  if (W.ambient_dim() != M.rows()) {
    std::ostringstream os;
    os << "preimage: subspace lives in R^" << W.ambient_dim() << " but map has " << M.rows()
       << " rows";
    throw DimensionError(os.str());
  }
  const Index rows = M.rows();
  const Matrix residual_map = (Matrix::Identity(rows, rows) - W.projector()) * M;
  return orthonormal_kernel(residual_map, tol, norm2(M));
}

/// im(M restricted to U) = M * U.
inline Subspace subspace_image(const Matrix& M, const Subspace& U, const Tolerances& tol = {}) {
  if (U.ambient_dim() != M.cols()) throw DimensionError("image: dimension mismatch");
  return orthonormal_image(M * U.basis(), tol, norm2(M));
}

namespace detail {

struct RealSchur {
  Matrix T;
  Matrix Z;
  Vector wr;
  Vector wi;
};

// A = Z T Z^T with T in LAPACK's standardized quasi-triangular form.
inline RealSchur real_schur(const Matrix& A) {
  const Index n = A.rows();
  RealSchur s{A, Matrix::Zero(n, n), Vector::Zero(n), Vector::Zero(n)};
  if (n == 0) return s;
  lapack_int sdim = 0;
  const lapack_int info = LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr,
                                        static_cast<lapack_int>(n), s.T.data(),
                                        static_cast<lapack_int>(n), &sdim, s.wr.data(),
                                        s.wi.data(), s.Z.data(), static_cast<lapack_int>(n));
  if (info != 0) throw Error("real Schur decomposition failed (dgees info " + std::to_string(info) + ")");
  return s;
}

}  // namespace detail

struct StableSubspace {
  Subspace subspace;
  /// Eigenvalues with |Re| within the marginal band; excluded from `subspace`.
  Index marginal_count = 0;
  bool marginal() const { return marginal_count > 0; }
};

/// Real invariant subspace of the eigenvalues with Re < 0, from an ordered
/// real Schur form. Eigenvalues with |Re| <= rank_tol * max(1, |A|) are
/// marginal and left out.
inline StableSubspace stable_invariant_subspace(const Matrix& A, const Tolerances& tol = {}) {
  require_square(A, "A");
  const Index n = A.rows();
  if (n == 0) return {Subspace::zero(0), 0};
  auto schur = detail::real_schur(A);
  const double band = tol.rank_tol * std::max(1.0, norm2(A));

  std::vector<lapack_logical> select(static_cast<std::size_t>(n), 0);
  Index marginal = 0;
  for (Index i = 0; i < n; ++i) {
    select[static_cast<std::size_t>(i)] = schur.wr(i) < -band ? 1 : 0;
    if (std::abs(schur.wr(i)) <= band) ++marginal;
  }
  lapack_int selected = 0;
  double cond_s = 0.0, cond_sep = 0.0;
  // The high-level LAPACKE wrapper leaves iwork unallocated for job 'N' while
  // dtrsen still writes iwork[0]; pass the workspaces explicitly.
  std::vector<double> work(static_cast<std::size_t>(std::max<Index>(1, n)));
  lapack_int iwork = 0;
  const lapack_int info = LAPACKE_dtrsen_work(
      LAPACK_COL_MAJOR, 'N', 'V', select.data(), static_cast<lapack_int>(n), schur.T.data(),
      static_cast<lapack_int>(n), schur.Z.data(), static_cast<lapack_int>(n), schur.wr.data(),
      schur.wi.data(), &selected, &cond_s, &cond_sep, work.data(),
      static_cast<lapack_int>(work.size()), &iwork, 1);
  if (info != 0) throw Error("Schur reordering failed (dtrsen info " + std::to_string(info) + ")");
  Matrix basis = schur.Z.leftCols(selected);
  return {Subspace::from_orthonormal(std::move(basis)), marginal};
}

/// Solves F^T P + P F + W = 0 for Hurwitz F (Bartels-Stewart).
inline Matrix lyapunov_solve(const Matrix& F, const Matrix& W) {
  require_square(F, "F");
  require_square(W, "W");
  if (F.rows() != W.rows()) throw DimensionError("lyapunov_solve: F and W sizes differ");
  const Index n = F.rows();
  if (n == 0) return Matrix(0, 0);
  auto schur = detail::real_schur(F);
  const double abscissa = schur.wr.maxCoeff();
  if (!(abscissa < 0.0)) throw NotHurwitzError(abscissa);

  // T^T Y + Y T = -Z^T W Z, then P = Z Y Z^T.
  Matrix C = -(schur.Z.transpose() * symmetrized(W) * schur.Z);
  double scale = 1.0;
  const lapack_int ln = static_cast<lapack_int>(n);
  const lapack_int info = LAPACKE_dtrsyl(LAPACK_COL_MAJOR, 'T', 'N', 1, ln, ln, schur.T.data(), ln,
                                         schur.T.data(), ln, C.data(), ln, &scale);
  if (info < 0) throw Error("dtrsyl failed with info " + std::to_string(info));
  C /= scale;
  return symmetrized(schur.Z * C * schur.Z.transpose());
}

/// exp(M) by scaling and squaring with a Pade approximant.
inline Matrix matrix_exponential(const Matrix& M) {
  require_square(M, "M");
  if (M.rows() == 0) return Matrix(0, 0);
  if (M.isZero(0.0)) return Matrix::Identity(M.rows(), M.cols());
  return M.exp();
}

}  // namespace singlq
