// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance               run all criteria
//   acceptance --criterion k run criterion k only
//
// Exit status is nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "singlq/singlq.hpp"
#include "support/oracles.hpp"

using namespace singlq;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances, pinned.
constexpr double kXbarTol = 1e-6;
constexpr double kTanhTol = 1e-6;
constexpr double kScalarCostRelTol = 1e-4;
constexpr double kResidualTol = 1e-7;
constexpr double kConstraintTol = 1e-7;
constexpr double kUndecidedRate = 0.10;
constexpr double kMonotoneTol = 1e-9;
constexpr double kCrossMethodTol = 1e-6;
constexpr double kCheapCostTol = 1e-8;
constexpr double kFamilyRelTol = 1e-3;
constexpr double kProjectionTol = 1e-8;

constexpr int kCampaignSize = 200;
constexpr std::uint64_t kCampaignSeed = 20240;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct CampaignInstance {
  std::string name;
  InstanceClass cls;
  Problem problem;
};

std::vector<CampaignInstance> campaign() {
  std::vector<CampaignInstance> out;
  std::mt19937_64 dims(kCampaignSeed);
  for (int i = 0; i < kCampaignSize; ++i) {
    GenerateOptions g;
    g.seed = kCampaignSeed + static_cast<std::uint64_t>(i);
    g.n = 1 + static_cast<Index>(dims() % 5);
    g.m = 1 + static_cast<Index>(dims() % 3);
    g.cls = static_cast<InstanceClass>(i % 4);
    const ProblemDocument d = generate_instances(g, 1).front();
    out.push_back({d.name, g.cls, to_problem(d)});
  }
  return out;
}

RdeOptions sampled() {
  RdeOptions o;
  o.keep_states = true;
  return o;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  const Problem P = to_problem(read_problem_document(std::string(SINGLQ_FIXTURE_DIR) + "/remark2.json"));
  const Report r = analyze(P);
  const ConditionVerdicts& v = r.verdicts;
  const GeometricSummary& g = r.condition_d.summary;
  const double elapsed = seconds_since(t0);
  std::ostringstream os;
  os << "dims V*=" << g.vstar.dim() << " S*=" << g.sstar.dim() << " R*=" << g.rstar.dim()
     << " S*=R*:" << v.sstar_eq_rstar << " finiteness=" << to_string(v.finiteness)
     << " rde=" << to_string(r.condition_b.rde.status) << " A/B/C/D=" << to_string(v.A) << "/" << to_string(v.B)
     << "/" << to_string(v.C) << "/" << to_string(v.D) << " consistency=" << v.consistency_ok << " time=" << elapsed
     << "s";
  const bool pass = g.vstar.dim() == 1 && g.sstar.dim() == 1 && g.rstar.dim() == 1 && v.sstar_eq_rstar &&
                    v.finiteness == Verdict::fails && r.condition_b.rde.status == RdeStatus::diverged &&
                    v.A == Verdict::fails && v.B == Verdict::fails && v.C == Verdict::fails &&
                    v.D == Verdict::fails && v.consistency_ok && elapsed < 1.0;
  return {pass, os.str()};
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  const Problem P = testing::scalar_regular();
  const Report r = analyze(P, sampled());
  bool pass = r.verdicts.B == Verdict::holds && r.synthesis.has_value();
  double xbar = NAN, k = NAN, flow_err = 0.0, cost = NAN, rel = NAN;
  if (pass) {
    xbar = r.synthesis->X_bar(0, 0);
    k = r.synthesis->K(0, 0);
    int checked = 0;
    for (const StateSample& s : r.condition_b.rde.state_samples) {
      if (s.t == 0.5 || s.t == 1.0 || s.t == 2.0) {
        flow_err = std::max(flow_err, std::abs(s.X(0, 0) - std::tanh(s.t)));
        ++checked;
      }
    }
    Vector x0(1);
    x0 << 2.0;
    const CostVerification cv = verify_optimal_cost(P, *r.synthesis, x0);
    cost = cv.simulated_cost;
    rel = std::abs(cost - 4.0) / 4.0;
    pass = checked == 3 && std::abs(xbar - 1.0) <= kXbarTol && flow_err <= kTanhTol && std::abs(k - 1.0) <= kXbarTol &&
           rel <= kScalarCostRelTol && cv.status == Verdict::holds;
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < 1.0;
  std::ostringstream os;
  os.precision(12);
  os << "X_bar=" << xbar << " K=" << k << " max|X(t)-tanh t| at {0.5,1,2}=" << flow_err << " cost(x0=2)=" << cost
     << " rel=" << rel << " time=" << elapsed << "s";
  return {pass, os.str()};
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  int contradictions = 0, undecided = 0, certified = 0, bad_certificate = 0, refuted_limits = 0;
  double worst_residual = 0.0, worst_constraint = 0.0;
  std::string first_bad;
  for (const CampaignInstance& c : campaign()) {
    const Report r = analyze(c.problem);
    const ConditionVerdicts& v = r.verdicts;
    if (!v.consistency_ok) {
      ++contradictions;
      if (first_bad.empty()) first_bad = c.name;
    }
    if (v.any_undecided()) ++undecided;
    if (r.condition_b.rde.status == RdeStatus::converged && v.B != Verdict::holds) ++refuted_limits;
    if (v.B == Verdict::holds) {
      ++certified;
      const CgcareVerdict chk = cgcare_check(*r.condition_b.X_bar, c.problem);
      worst_residual = std::max(worst_residual, chk.residual_norm);
      worst_constraint = std::max({worst_constraint, chk.constraint_norm, chk.constraint_cross_norm});
      if (!(chk.residual_norm <= kResidualTol && chk.constraint_norm <= kConstraintTol &&
            chk.constraint_cross_norm <= kConstraintTol)) {
        ++bad_certificate;
      }
    }
  }
  const double rate = static_cast<double>(undecided) / kCampaignSize;
  const double elapsed = seconds_since(t0);
  std::ostringstream os;
  os << kCampaignSize << " instances: contradictions=" << contradictions << " undecided=" << undecided << " ("
     << rate * 100 << "%) certified X_bar=" << certified << " failing check=" << bad_certificate
     << " worst residual=" << worst_residual << " worst constraint=" << worst_constraint
     << " converged limits refuted by the kernel constraint=" << refuted_limits << " time=" << elapsed << "s";
  if (!first_bad.empty()) os << " first contradiction: " << first_bad;
  return {contradictions == 0 && bad_certificate == 0 && rate <= kUndecidedRate && elapsed < 120.0, os.str()};
}

Outcome criterion4() {
  int violations = 0, moderate_violations = 0;
  double worst_level = 0.0, worst_step = 0.0, worst_relative = 0.0;
  std::size_t pairs = 0;
  std::string first_bad;
  for (const CampaignInstance& c : campaign()) {
    const RdeOutcome out = integrate_rde(c.problem, sampled());
    const auto& s = out.state_samples;
    bool bad = false;
    double peak = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      peak = std::max(peak, s[i].X.norm());
      const double level = testing::lambda_min(s[i].X);
      worst_level = std::min(worst_level, level);
      bad = bad || level < -kMonotoneTol;
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        const double step = testing::lambda_min(s[j].X - s[i].X);
        worst_step = std::min(worst_step, step);
        if (step < -kMonotoneTol) {
          bad = true;
          worst_relative = std::max(worst_relative, -step / s[j].X.norm());
        }
        ++pairs;
      }
    }
    if (bad) {
      ++violations;
      if (peak <= 1e3) ++moderate_violations;
      if (first_bad.empty()) first_bad = c.name;
    }
  }
  std::ostringstream os;
  os << "instances with violations=" << violations << " (with max |X| <= 1e3: " << moderate_violations
     << ") pairs checked=" << pairs << " min lambda(X)=" << worst_level
     << " min lambda(X(t2)-X(t1))=" << worst_step << " worst violation relative to |X(t2)|=" << worst_relative;
  if (!first_bad.empty()) os << " first violation: " << first_bad;
  return {violations == 0, os.str()};
}

Outcome criterion5() {
  int compared = 0, failures = 0;
  double worst_care = 0.0, worst_gram = 0.0;
  for (const CampaignInstance& c : campaign()) {
    if (c.cls != InstanceClass::regular) continue;
    const ConditionBResult b = check_condition_B(c.problem);
    if (b.verdict != Verdict::holds) continue;
    const Matrix& X = *b.X_bar;
    const PopovFactorization f = factor_popov(c.problem);
    const auto gram = closed_loop_gramian(c.problem, X, f);
    if (!gram) continue;
    ++compared;
    const auto care = regular_reduction_care(c.problem, input_split(c.problem, f));
    const double scale = 1.0 + X.norm();
    const double e_care = care && care->rde.X_limit ? (X - *care->rde.X_limit).norm() / scale : INFINITY;
    const double e_gram = (X - *gram).norm() / scale;
    worst_care = std::max(worst_care, e_care);
    worst_gram = std::max(worst_gram, e_gram);
    if (!(e_care <= kCrossMethodTol && e_gram <= kCrossMethodTol)) ++failures;
  }
  std::ostringstream os;
  os << "regular instances compared=" << compared << " failures=" << failures
     << " max |X_rde-X_care1|/(1+|X|)=" << worst_care << " max |X_rde-Gramian|/(1+|X|)=" << worst_gram;
  return {compared > 0 && failures == 0, os.str()};
}

Outcome criterion6() {
  int holding = 0, zero_cost = 0, attempts = 0, b_holds = 0, d_holds = 0, finite = 0;
  double worst_cost = 0.0;
  GenerateOptions g;
  g.cls = InstanceClass::cheap;
  g.stable = true;
  std::mt19937_64 rng(606);
  for (int i = 0; i < 20; ++i) {
    g.seed = 6000 + static_cast<std::uint64_t>(i);
    g.n = 1 + static_cast<Index>(rng() % 5);
    g.m = 1 + static_cast<Index>(rng() % 3);
    const Problem P = to_problem(generate_instances(g, 1).front());
    const Report r = analyze(P);
    const ConditionVerdicts& v = r.verdicts;
    const bool holds = v.A == Verdict::holds && v.B == Verdict::holds && v.C == Verdict::holds &&
                       v.D == Verdict::holds;
    b_holds += v.B == Verdict::holds;
    d_holds += v.D == Verdict::holds;
    finite += v.finiteness == Verdict::holds;
    if (!holds) continue;
    ++holding;
    for (int k = 0; k < 3; ++k) {
      ++attempts;
      const Vector x0 = testing::random_matrix(rng, P.n(), 1);
      const CostVerification cv = verify_optimal_cost(P, *r.synthesis, x0);
      worst_cost = std::max(worst_cost, cv.simulated_cost);
      if (cv.status == Verdict::holds && cv.simulated_cost <= kCheapCostTol) ++zero_cost;
    }
  }
  std::ostringstream os;
  os << "cheap Hurwitz instances with all conditions holding=" << holding << "/20, zero-cost checks passed="
     << zero_cost << "/" << attempts << " (B holds=" << b_holds << " D holds=" << d_holds
     << " finiteness holds=" << finite << ")";
  if (attempts > 0) os << " worst simulated cost=" << worst_cost;
  return {holding == 20 && zero_cost == 60, os.str()};
}

Outcome criterion7() {
  int runs = 0, failures = 0, instances = 0, skipped = 0;
  double worst = 0.0;
  // Seeds are drawn until ten instances have B decided as holding.
  for (std::uint64_t seed = 0; seed < 40 && instances < 10; ++seed) {
    const Index na = 1 + static_cast<Index>(seed % 3), nb = 1 + static_cast<Index>((seed / 3) % 2);
    const Problem P = testing::problem_of(testing::structured_instance(7000 + seed, na, nb, 1, 1 + seed % 2));
    const Report r = analyze(P);
    if (r.verdicts.B != Verdict::holds) {
      ++skipped;
      continue;
    }
    ++instances;
    const Synthesis& syn = *r.synthesis;
    const double alpha = observed_abscissa(P, syn, r.factorization);
    const double T = verification_horizon(alpha).value_or(kMinVerificationHorizon);
    std::mt19937_64 rng(seed);
    const Vector x0 = testing::random_matrix(rng, P.n(), 1);
    const double expected = x0.dot(syn.X_bar * x0);
    for (int k = 0; k < 5; ++k) {
      const Matrix amp = testing::random_matrix(rng, P.m(), 3);
      const Vector freq = 0.5 + 2.0 * (testing::random_matrix(rng, 3, 1).array() + 1.0);
      const InputSignal v = [&, T](double t) -> Vector {
        Vector out = Vector::Zero(P.m());
        if (t > T / 2) return out;
        for (Index j = 0; j < 3; ++j) out += amp.col(j) * std::sin(freq(j) * t);
        return out;
      };
      const Trajectory tr = simulate(P, syn, x0, v, T, resolving_step(syn.A_K, T));
      const double rel = std::abs(tr.running_cost.back() - expected) / std::abs(expected);
      worst = std::max(worst, rel);
      ++runs;
      if (!(rel <= kFamilyRelTol)) ++failures;
    }
  }
  std::ostringstream os;
  os << "condition-B instances=" << instances << " (seeds skipped: " << skipped << ") runs=" << runs
     << " failures=" << failures << " max |J_T - x0'X x0|/(x0'X x0)=" << worst;
  return {instances == 10 && runs == 50 && failures == 0, os.str()};
}

Outcome criterion8() {
  double worst_v = 0.0, worst_s = 0.0, worst_inv = 0.0, worst_triple = 0.0, worst_kernel = 0.0;
  int instances = 0, b_instances = 0, failures = 0;
  std::mt19937_64 rng(808);
  std::vector<Problem> problems;
  for (const CampaignInstance& c : campaign()) problems.push_back(c.problem);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    problems.push_back(testing::problem_of(testing::structured_instance(8000 + seed)));
  }
  const auto residual_between = [](const Subspace& U, const Subspace& W) {
    if (U.dim() != W.dim()) return std::numeric_limits<double>::infinity();
    return std::max(U.residual(W.basis()), W.residual(U.basis()));
  };
  for (const Problem& P : problems) {
    ++instances;
    const PopovFactorization f = factor_popov(P);
    const Quadruple q = quadruple_of(P, f);
    const Subspace V = vstar(q), S = sstar(q), R = subspace_intersection(V, S);
    const double cv = vstar_certificate(q, V), cs = sstar_certificate(q, S);
    worst_v = std::max(worst_v, cv);
    worst_s = std::max(worst_s, cs);

    const Matrix U = testing::random_orthogonal(rng, f.p() + 1);
    Matrix C = Matrix::Zero(f.p() + 1, P.n()), D = Matrix::Zero(f.p() + 1, P.m());
    C.topRows(f.p()) = f.C;
    D.topRows(f.p()) = f.D;
    const Quadruple q2 = quadruple_of(P, make_factorization(P, U * C, U * D));
    const double inv =
        std::max({residual_between(V, vstar(q2)), residual_between(S, sstar(q2)), residual_between(R, rstar(q2))});
    worst_inv = std::max(worst_inv, inv);
    bool ok = cv <= kProjectionTol && cs <= kProjectionTol && inv <= kProjectionTol;

    const ConditionBResult b = check_condition_B(P);
    if (b.verdict == Verdict::holds) {
      ++b_instances;
      const Subspace RD = reach_deflected(P, input_split(P, f), deflected(P, f));
      const double triple = std::max(residual_between(S, R), residual_between(R, RD));
      const double kernel = RD.is_zero() ? 0.0 : norm2(*b.X_bar * RD.basis()) / std::max(1.0, norm2(*b.X_bar));
      worst_triple = std::max(worst_triple, triple);
      worst_kernel = std::max(worst_kernel, kernel);
      ok = ok && triple <= kProjectionTol && kernel <= kProjectionTol;
    }
    if (!ok) ++failures;
  }
  std::ostringstream os;
  os << "instances=" << instances << " (condition B: " << b_instances << ") failures=" << failures
     << " V* cert=" << worst_v << " S* cert=" << worst_s << " factor invariance=" << worst_inv
     << " S*=R*=R(A0,BG)=" << worst_triple << " R(A0,BG) in ker X=" << worst_kernel;
  return {failures == 0, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion k]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8};
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  bool all = true;
  for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) {
    if (only != 0 && k != only) continue;
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(k - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
