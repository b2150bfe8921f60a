#pragma once

// Riccati machinery for the generalized (pseudo-inverse) Riccati equation:
//
//   GCARE:   X A + A^T X - (S + X B) R^+ (S^T + B^T X) + Q = 0
//   CGCARE:  GCARE plus ker R in ker(S + X B)
//
// The generalized Riccati flow dX/dt = GCARE(X) started at X(0) = 0 is a
// monotone nondecreasing family of PSD matrices; its limit, when it exists,
// is the candidate minimal PSD solution.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "singlq/matlib.hpp"
#include "singlq/model.hpp"

namespace singlq {

inline Matrix gcare_residual(const Matrix& X, const Problem& P) {
  const Matrix SX = P.S() + X * P.B();
  return symmetrized(X * P.A() + P.A().transpose() * X - SX * P.R_pinv() * SX.transpose() + P.Q());
}

struct CgcareVerdict {
  bool is_solution = false;
  double residual_norm = 0.0;
  /// |(S + X B) G|
  double constraint_norm = 0.0;
  /// |X B G|; equivalent to constraint_norm because ker R lies in ker S.
  double constraint_cross_norm = 0.0;
  bool residual_ok = false;
  bool constraint_ok = false;
};

inline CgcareVerdict cgcare_check(const Matrix& X, const Problem& P) {
  require_symmetric(X, P.n(), "X");
  const Tolerances& tol = P.tolerances();
  CgcareVerdict v;
  v.residual_norm = gcare_residual(X, P).norm();
  v.constraint_norm = ((P.S() + X * P.B()) * P.G()).norm();
  v.constraint_cross_norm = (X * P.B() * P.G()).norm();
  const double constraint_bound = tol.residual_tol * (1.0 + X.norm());
  v.residual_ok = v.residual_norm <= tol.residual_tol * (1.0 + P.popov_norm());
  v.constraint_ok = v.constraint_norm <= constraint_bound && v.constraint_cross_norm <= constraint_bound;
  v.is_solution = v.residual_ok && v.constraint_ok;
  return v;
}

struct RdeOptions {
  /// Initial time step.
  double step = 1e-3;
  double max_time = 500.0;
  /// Convergence when |dX/dt| <= conv_tol for a full window.
  double conv_tol = 1e-9;
  /// Trace bound declaring divergence; default 1e9 (1 + |Pi| + |A|^2).
  std::optional<double> div_bound;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 0.5;
  /// Output grid for trajectory samples; steps land exactly on it.
  double sample_interval = 0.5;
  /// Keep full matrix samples on the output grid.
  bool keep_states = false;

  void validate() const {
    if (!(step > 0) || !(max_time > 0) || !(conv_tol > 0) || !(rel_tol > 0) || !(abs_tol > 0) ||
        !(max_step > 0) || !(sample_interval > 0) || (div_bound && !(*div_bound > 0))) {
      throw ValidationError("RDE options must be strictly positive");
    }
  }
};

enum class RdeStatus { converged, diverged, horizon_exhausted };

inline const char* to_string(RdeStatus s) {
  switch (s) {
    case RdeStatus::converged: return "converged";
    case RdeStatus::diverged: return "diverged";
    case RdeStatus::horizon_exhausted: return "horizon_exhausted";
  }
  return "?";
}

struct TraceSample {
  double t;
  double trace;
};

struct StateSample {
  double t;
  Matrix X;
};

struct RdeOutcome {
  RdeStatus status = RdeStatus::horizon_exhausted;
  std::optional<Matrix> X_limit;
  std::vector<TraceSample> trajectory_samples;
  std::vector<StateSample> state_samples;
  double final_time = 0.0;
  Matrix final_state;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::string diagnostic;
};

inline constexpr int kConvergenceWindow = 10;

namespace detail {

// Right-hand side of the generalized Riccati flow in deflected form
// dX/dt = X A0 + A0^T X - X W X + C0^T C0 with W = B R^+ B^T. The constant
// term is a Gram matrix, so round-off never makes it indefinite, and it is
// exactly zero when im D spans the output space.
class RiccatiField {
 public:
  explicit RiccatiField(const Problem& P) {
    const Matrix RS = P.R_pinv() * P.S().transpose();
    A0_ = P.A() - P.B() * RS;
    W_ = symmetrized(P.B() * P.R_pinv() * P.B().transpose());
    const PopovFactorization fact = factor_popov(P);
    const Subspace free = orthonormal_kernel(fact.D.transpose(), P.tolerances());
    const Matrix C0 = free.basis().transpose() * fact.C;
    Q0_ = symmetrized(C0.transpose() * C0);
  }

  Matrix operator()(const Matrix& X) const {
    const Matrix XA = X * A0_;
    Matrix F = XA + XA.transpose();
    F.noalias() -= X * W_ * X;
    F += Q0_;
    return symmetrized(F);
  }

 private:
  Matrix A0_, W_, Q0_;
};

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
  static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b - b* (fifth minus fourth order weights).
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

struct StepResult {
  Matrix y;
  Matrix f_new;
  double error = 0.0;  // scaled max-norm, accept when <= 1
};

// One Dormand-Prince step from (y, f0 = field(y)). Works for any callable
// mapping a matrix to its time derivative; `field` receives the stage time.
template <class Field>
StepResult dopri5_step(const Field& field, double t, const Matrix& y, const Matrix& f0, double h,
                       double rel_tol, double abs_tol) {
  using T = Dopri5;
  const Matrix k1 = f0;
  const Matrix k2 = field(t + T::c[1] * h, y + h * (T::a21 * k1));
  const Matrix k3 = field(t + T::c[2] * h, y + h * (T::a31 * k1 + T::a32 * k2));
  const Matrix k4 = field(t + T::c[3] * h, y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3));
  const Matrix k5 =
      field(t + T::c[4] * h, y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4));
  const Matrix k6 = field(
      t + h, y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5));
  StepResult r;
  r.y = y + h * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
  r.f_new = field(t + h, r.y);
  const Matrix err =
      h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * r.f_new);
  double worst = 0.0;
  for (Index j = 0; j < y.cols(); ++j) {
    for (Index i = 0; i < y.rows(); ++i) {
      const double scale = abs_tol + rel_tol * std::max(std::abs(y(i, j)), std::abs(r.y(i, j)));
      worst = std::max(worst, std::abs(err(i, j)) / scale);
    }
  }
  r.error = std::isfinite(worst) ? worst : std::numeric_limits<double>::infinity();
  return r;
}

inline double next_step_factor(double error) {
  if (error == 0.0) return 5.0;
  return std::clamp(0.9 * std::pow(error, -0.2), 0.2, 5.0);
}

struct FlowPolicy {
  double t_end;
  bool stop_on_convergence;
  bool stop_on_divergence;
};

inline double default_div_bound(const Problem& P) {
  const double a = norm2(P.A());
  return 1e9 * (1.0 + P.popov_norm() + a * a);
}

// Growth checkpoints at 10 * 2^k. The flow diverges linearly or faster when
// the trace of dX/dt fails to decay across three consecutive doublings.
inline constexpr double kFirstCheckpoint = 10.0;
inline constexpr double kGrowthRatio = 0.98;
inline constexpr int kGrowthRun = 3;

// Shared driver for integrate_rde and finite_horizon_value so that both
// produce bit-identical states on the common output grid.
inline RdeOutcome run_flow(const Problem& P, const RdeOptions& opts, const FlowPolicy& policy) {
  opts.validate();
  const Index n = P.n();
  const RiccatiField field(P);
  const auto f = [&field](double, const Matrix& X) { return field(X); };
  const double div_bound = opts.div_bound.value_or(default_div_bound(P));

  RdeOutcome out;
  Matrix X = Matrix::Zero(n, n);
  Matrix F = field(X);
  double t = 0.0;
  double h = std::min(opts.step, opts.max_step);
  long long grid_index = 1;
  double next_sample = opts.sample_interval;
  int calm = 0;
  double next_check = kFirstCheckpoint;
  std::vector<double> growth;

  auto record = [&](double time) {
    out.trajectory_samples.push_back({time, X.trace()});
    if (opts.keep_states) out.state_samples.push_back({time, X});
  };
  record(0.0);

  const auto finish = [&](RdeStatus status, std::string diagnostic) {
    out.status = status;
    out.final_time = t;
    out.final_state = X;
    out.diagnostic = std::move(diagnostic);
    if (status == RdeStatus::converged) out.X_limit = X;
    if (out.trajectory_samples.back().t != t) record(t);
    return out;
  };

  if (policy.stop_on_convergence && F.norm() == 0.0) {
    return finish(RdeStatus::converged, "zero initial derivative: X = 0 is an equilibrium");
  }

  while (t < policy.t_end) {
    const double target = std::min(next_sample, policy.t_end);
    const bool clipped = t + h >= target;
    const double step = clipped ? target - t : h;
    const double h_min = 1e-14 * std::max(1.0, t);
    if (step < h_min && !clipped) {
      return finish(RdeStatus::horizon_exhausted, "step size underflow at t = " + std::to_string(t));
    }

    auto trial = dopri5_step(f, t, X, F, step, opts.rel_tol, opts.abs_tol);
    if (!(trial.error <= 1.0)) {
      ++out.rejected_steps;
      h = step * std::max(0.2, std::min(0.9, next_step_factor(trial.error)));
      if (h < h_min) {
        return finish(RdeStatus::horizon_exhausted,
                      "step size underflow at t = " + std::to_string(t));
      }
      continue;
    }

    ++out.accepted_steps;
    t = clipped ? target : t + step;
    X = symmetrized(trial.y);
    F = symmetrized(trial.f_new);
    h = std::min(opts.max_step, step * next_step_factor(trial.error));
    if (clipped && target == next_sample) {
      record(t);
      ++grid_index;
      next_sample = static_cast<double>(grid_index) * opts.sample_interval;
    }

    if (!X.allFinite()) {
      return finish(RdeStatus::diverged, "non-finite state at t = " + std::to_string(t));
    }
    const double tr = X.trace();
    if (policy.stop_on_divergence && tr > div_bound) {
      return finish(RdeStatus::diverged, "trace exceeded divergence bound at t = " + std::to_string(t));
    }
    if (policy.stop_on_convergence) {
      calm = F.norm() <= opts.conv_tol ? calm + 1 : 0;
      if (calm >= kConvergenceWindow) return finish(RdeStatus::converged, "");
    }
    if (policy.stop_on_divergence && t >= next_check) {
      growth.push_back(F.trace());
      next_check *= 2.0;
      const auto k = growth.size();
      if (k > kGrowthRun) {
        bool sustained = true;
        for (std::size_t i = k - kGrowthRun; i < k; ++i) {
          if (!(growth[i] >= kGrowthRatio * growth[i - 1]) || !(growth[i] > 0.0)) sustained = false;
        }
        if (sustained && F.norm() > opts.conv_tol) {
          return finish(RdeStatus::diverged,
                        "sustained growth of trace X(t) (non-decaying derivative) at t = " +
                            std::to_string(t));
        }
      }
    }
  }
  return finish(RdeStatus::horizon_exhausted, "horizon reached before convergence");
}

}  // namespace detail

/// Integrates the generalized Riccati flow from X(0) = 0.
inline RdeOutcome integrate_rde(const Problem& P, const RdeOptions& opts = {}) {
  return detail::run_flow(P, opts, {opts.max_time, true, true});
}

/// P_T(0) = X(T): the finite-horizon optimal cost matrix over [0, T].
inline Matrix finite_horizon_value(const Problem& P, double T, const RdeOptions& opts = {}) {
  if (T < 0.0) throw ValidationError("horizon must be nonnegative");
  if (T == 0.0) return Matrix::Zero(P.n(), P.n());
  return detail::run_flow(P, opts, {T, false, false}).final_state;
}

/// The regular CARE over the input directions in im R, solved via the flow.
struct ReducedCareResult {
  RdeOutcome rde;
  /// Check of the reduced solution against the full CGCARE (present iff converged).
  std::optional<CgcareVerdict> full_check;
  bool solves_full_cgcare() const { return full_check && full_check->is_solution; }
};

/// The reduced problem (A, B T1, Q, S T1, T1^T R T1); T1^T R T1 is positive definite.
inline Problem reduced_regular_problem(const Problem& P, const InputSplit& split) {
  if (split.r == 0) throw ValidationError("reduction needs rank R >= 1");
  return validate_problem(P.A(), split.B1, P.Q(), P.S() * split.T1,
                          split.T1.transpose() * P.R() * split.T1, P.tolerances());
}

/// std::nullopt when rank R = 0 (cheap case, nothing to reduce).
inline std::optional<ReducedCareResult> regular_reduction_care(const Problem& P,
                                                               const InputSplit& split,
                                                               const RdeOptions& opts = {}) {
  if (split.r == 0) return std::nullopt;
  const Problem reduced = reduced_regular_problem(P, split);
  ReducedCareResult result{integrate_rde(reduced, opts), std::nullopt};
  if (result.rde.X_limit) result.full_check = cgcare_check(*result.rde.X_limit, P);
  return result;
}

/// Observability Gramian of (A_K, C_K) for K = K_X; reproduces X when the
/// closed loop is Hurwitz. std::nullopt when A_K is not Hurwitz.
inline std::optional<Matrix> closed_loop_gramian(const Problem& P, const Matrix& X,
                                                 const PopovFactorization& fact) {
  const AssociatedData data = associated(X, P);
  const Matrix CK = fact.C - fact.D * data.KX;
  if (!(spectral_abscissa(data.AX) < 0.0)) return std::nullopt;
  try {
    return lyapunov_solve(data.AX, CK.transpose() * CK);
  } catch (const NotHurwitzError&) {
    return std::nullopt;
  }
}

}  // namespace singlq
