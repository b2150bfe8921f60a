#pragma once

// Geometric subspaces of the quadruple (A, B, C, D):
//   V*  largest output-nulling subspace
//   S*  smallest input-containing subspace
//   R*  = V* n S*, largest reachability output-nulling subspace
// plus the reachable subspace <A, im B>, the stable invariant subspace of A
// and the finiteness test V* + <A, im B> + X_stab = R^n.

#include <sstream>
#include <vector>

#include "singlq/matlib.hpp"
#include "singlq/model.hpp"

namespace singlq {

struct Quadruple {
  Matrix A, B, C, D;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return C.rows(); }

  void validate() const {
    require_square(A, "A");
    if (B.rows() != n() || C.cols() != n() || D.rows() != p() || D.cols() != m()) {
      std::ostringstream os;
      os << "incompatible quadruple: A " << A.rows() << "x" << A.cols() << ", B " << B.rows()
         << "x" << B.cols() << ", C " << C.rows() << "x" << C.cols() << ", D " << D.rows() << "x"
         << D.cols();
      throw DimensionError(os.str());
    }
  }
};

inline Quadruple quadruple_of(const Problem& P, const PopovFactorization& fact) {
  return {P.A(), P.B(), fact.C, fact.D};
}

/// Recursion trace, for monotonicity checks.
struct RecursionTrace {
  std::vector<Index> dims;
};

/// V_0 = R^n, V_{k+1} = [A; C]^{-1} ((V_k x {0}) + im [B; D]).
inline Subspace vstar(const Quadruple& q, const Tolerances& tol = {}, RecursionTrace* trace = nullptr) {
  q.validate();
  const Index n = q.n(), m = q.m(), p = q.p();
  Matrix AC(n + p, n);
  AC << q.A, q.C;
  Matrix BD(n + p, m);
  BD << q.B, q.D;

  Subspace V = Subspace::full(n);
  if (trace) trace->dims.push_back(V.dim());
  for (Index k = 0; k <= n; ++k) {
    Matrix gens(n + p, V.dim() + m);
    gens.topLeftCorner(n, V.dim()) = V.basis();
    gens.bottomLeftCorner(p, V.dim()).setZero();
    gens.rightCols(m) = BD;
    const Subspace W = orthonormal_image(gens, tol, std::max(1.0, norm2(BD)));
    Subspace next = subspace_intersection(V, subspace_preimage(AC, W, tol), tol);
    if (trace) trace->dims.push_back(next.dim());
    const bool stationary = next.dim() == V.dim();
    V = std::move(next);
    if (stationary) break;
  }
  return V;
}

/// S_0 = {0}, S_{k+1} = [A B] ((S_k x R^m) n ker [C D]).
inline Subspace sstar(const Quadruple& q, const Tolerances& tol = {}, RecursionTrace* trace = nullptr) {
  q.validate();
  const Index n = q.n(), m = q.m(), p = q.p();
  Matrix AB(n, n + m);
  AB << q.A, q.B;
  Matrix CD(p, n + m);
  CD << q.C, q.D;
  const Subspace output_kernel = orthonormal_kernel(CD, tol);

  Subspace S = Subspace::zero(n);
  if (trace) trace->dims.push_back(S.dim());
  for (Index k = 0; k <= n; ++k) {
    Matrix lifted = Matrix::Zero(n + m, S.dim() + m);
    lifted.topLeftCorner(n, S.dim()) = S.basis();
    lifted.bottomRightCorner(m, m) = Matrix::Identity(m, m);
    const Subspace lifted_space = Subspace::from_orthonormal(std::move(lifted));
    const Subspace admissible = subspace_intersection(lifted_space, output_kernel, tol);
    Subspace next = subspace_sum(S, subspace_image(AB, admissible, tol), tol);
    if (trace) trace->dims.push_back(next.dim());
    const bool stationary = next.dim() == S.dim();
    S = std::move(next);
    if (stationary) break;
  }
  return S;
}

inline Subspace rstar(const Quadruple& q, const Tolerances& tol = {}) {
  return subspace_intersection(vstar(q, tol), sstar(q, tol), tol);
}

/// <A, im B>: im [B, AB, ..., A^{n-1} B], re-orthonormalized at each power.
inline Subspace reachable(const Matrix& A, const Matrix& B, const Tolerances& tol = {}) {
  require_square(A, "A");
  if (B.rows() != A.rows()) throw DimensionError("reachable: B rows must match A");
  const Index n = A.rows();
  Subspace R = orthonormal_image(B, tol);
  Subspace frontier = R;
  for (Index k = 1; k < n && !frontier.is_zero() && !R.is_full(); ++k) {
    const Subspace pushed = subspace_image(A, frontier, tol);
    const Subspace grown = subspace_sum(R, pushed, tol);
    if (grown.dim() == R.dim()) break;
    R = grown;
    frontier = pushed;
  }
  return R;
}

/// R(A0, B G): reachable subspace of the deflected pair.
inline Subspace reach_deflected(const Problem& P, const InputSplit& split, const DeflectedSystem& defl,
                                const Tolerances& tol = {}) {
  return reachable(defl.A0, P.B() * split.G, tol);
}

struct FinitenessVerdict {
  bool holds = false;
  /// A has eigenvalues on the imaginary axis (excluded from X_stab).
  bool fragile = false;
  Index dim_sum = 0;
};

/// V* + <A, im B> + X_stab = R^n.
inline FinitenessVerdict finiteness_test(const Problem& P, const Quadruple& q, const Tolerances& tol = {}) {
  q.validate();
  if (q.n() != P.n() || q.m() != P.m()) throw DimensionError("quadruple does not match problem");
  const StableSubspace stable = stable_invariant_subspace(P.A(), tol);
  const Subspace sum =
      subspace_sum(subspace_sum(vstar(q, tol), reachable(P.A(), P.B(), tol), tol), stable.subspace, tol);
  return {sum.dim() == P.n(), stable.marginal(), sum.dim()};
}

struct GeometricSummary {
  Subspace vstar, sstar, rstar, reachable, xstab;
  bool finiteness = false;
  bool fragile = false;
  bool sstar_eq_rstar = false;
};

inline GeometricSummary summarize(const Problem& P, const PopovFactorization& fact, const Tolerances& tol = {}) {
  const Quadruple q = quadruple_of(P, fact);
  GeometricSummary g;
  g.vstar = vstar(q, tol);
  g.sstar = sstar(q, tol);
  g.rstar = subspace_intersection(g.vstar, g.sstar, tol);
  g.reachable = reachable(P.A(), P.B(), tol);
  const StableSubspace stable = stable_invariant_subspace(P.A(), tol);
  g.xstab = stable.subspace;
  g.fragile = stable.marginal();
  g.finiteness = subspace_sum(subspace_sum(g.vstar, g.reachable, tol), g.xstab, tol).is_full();
  g.sstar_eq_rstar = equal(g.sstar, g.rstar);
  return g;
}

/// Residual of [A; C] V* inside (V* x {0}) + im [B; D].
inline double vstar_certificate(const Quadruple& q, const Subspace& V) {
  const Index n = q.n(), p = q.p(), m = q.m();
  Matrix AC(n + p, n);
  AC << q.A, q.C;
  Matrix gens(n + p, V.dim() + m);
  gens.topLeftCorner(n, V.dim()) = V.basis();
  gens.bottomLeftCorner(p, V.dim()).setZero();
  gens.rightCols(m) << q.B, q.D;
  const Subspace target = orthonormal_image(gens, {}, 1.0);
  return target.residual(AC * V.basis()) / std::max(1.0, norm2(AC));
}

/// Residual of [A B] ((S* x R^m) n ker [C D]) inside S*.
inline double sstar_certificate(const Quadruple& q, const Subspace& S) {
  const Index n = q.n(), m = q.m(), p = q.p();
  Matrix AB(n, n + m);
  AB << q.A, q.B;
  Matrix CD(p, n + m);
  CD << q.C, q.D;
  Matrix lifted = Matrix::Zero(n + m, S.dim() + m);
  lifted.topLeftCorner(n, S.dim()) = S.basis();
  lifted.bottomRightCorner(m, m) = Matrix::Identity(m, m);
  const Subspace admissible =
      subspace_intersection(Subspace::from_orthonormal(std::move(lifted)), orthonormal_kernel(CD));
  return S.residual(AB * admissible.basis()) / std::max(1.0, norm2(AB));
}

}  // namespace singlq
