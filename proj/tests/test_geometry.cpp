#include <random>

#include <gtest/gtest.h>

#include "singlq/geometry.hpp"
#include "support/oracles.hpp"

namespace singlq {
namespace {

using testing::random_matrix;

Quadruple integrator_quadruple() {
  const Problem P = testing::uncontrolled_integrator();
  return quadruple_of(P, factor_popov(P));
}

Vector e(Index n, Index i) {
  Vector v = Vector::Zero(n);
  v(i) = 1.0;
  return v;
}

TEST(Vstar, UncontrolledIntegrator) {
  const Subspace V = vstar(integrator_quadruple());
  ASSERT_EQ(V.dim(), 1);
  EXPECT_TRUE(V.contains_vectors(e(2, 1), 1e-14));
}

TEST(Vstar, InvertibleDMeansFullSpace) {
  std::mt19937_64 rng(71);
  const Quadruple q{random_matrix(rng, 3, 3), random_matrix(rng, 3, 2), random_matrix(rng, 2, 3),
                    Matrix::Identity(2, 2) + 0.1 * random_matrix(rng, 2, 2)};
  EXPECT_TRUE(vstar(q).is_full());
}

TEST(Vstar, ZeroCAndDMeansFullSpace) {
  const Quadruple q{Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1)};
  EXPECT_TRUE(vstar(q).is_full());
}

TEST(Vstar, MatchesQrOracleAndIsMonotone) {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 2 + trial % 4, m = 1 + trial % 2, p = 1 + trial % 3;
    Quadruple q{random_matrix(rng, n, n), random_matrix(rng, n, m), random_matrix(rng, p, n),
                random_matrix(rng, p, m)};
    if (trial % 2 == 0) q.D.setZero();
    RecursionTrace trace;
    const Subspace V = vstar(q, {}, &trace);
    const Matrix Vo = testing::oracle_vstar(q.A, q.B, q.C, q.D);
    EXPECT_TRUE(testing::same_span(V.basis(), Vo))
        << "trial " << trial << ": dim " << V.dim() << " vs oracle " << Vo.cols();
    for (std::size_t k = 1; k < trace.dims.size(); ++k) EXPECT_LE(trace.dims[k], trace.dims[k - 1]);
    EXPECT_LE(vstar_certificate(q, V), 1e-8);
  }
}

TEST(Sstar, UncontrolledIntegrator) {
  const Subspace S = sstar(integrator_quadruple());
  ASSERT_EQ(S.dim(), 1);
  EXPECT_TRUE(S.contains_vectors(e(2, 1), 1e-14));
  EXPECT_TRUE(equal(S, rstar(integrator_quadruple())));
}

TEST(Sstar, InjectiveDMeansZero) {
  std::mt19937_64 rng(79);
  const Quadruple q{random_matrix(rng, 3, 3), random_matrix(rng, 3, 2), random_matrix(rng, 4, 3),
                    random_matrix(rng, 4, 2)};
  EXPECT_TRUE(sstar(q).is_zero());
}

TEST(Sstar, ZeroOutputReachableSpace) {
  // With C = 0 and D = 0 every input is admissible, so S* = <A, im B>.
  std::mt19937_64 rng(83);
  const Matrix A = random_matrix(rng, 4, 4), B = random_matrix(rng, 4, 1);
  const Quadruple q{A, B, Matrix::Zero(1, 4), Matrix::Zero(1, 1)};
  EXPECT_TRUE(equal(sstar(q), reachable(A, B)));
}

TEST(Sstar, MonotoneFixedPoint) {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 2 + trial % 4, m = 1 + trial % 3, p = 1 + trial % 3;
    Quadruple q{random_matrix(rng, n, n), random_matrix(rng, n, m), random_matrix(rng, p, n),
                random_matrix(rng, p, m)};
    if (trial % 3 == 0) q.D.setZero();
    RecursionTrace trace;
    const Subspace S = sstar(q, {}, &trace);
    for (std::size_t k = 1; k < trace.dims.size(); ++k) EXPECT_GE(trace.dims[k], trace.dims[k - 1]);
    EXPECT_LE(sstar_certificate(q, S), 1e-8);
  }
}

TEST(Rstar, ContainedInBoth) {
  std::mt19937_64 rng(97);
  for (int trial = 0; trial < 20; ++trial) {
    const Quadruple q{random_matrix(rng, 4, 4), random_matrix(rng, 4, 2), random_matrix(rng, 1, 4),
                      Matrix::Zero(1, 2)};
    const Subspace R = rstar(q);
    EXPECT_TRUE(vstar(q).contains(R));
    EXPECT_TRUE(sstar(q).contains(R));
  }
}

TEST(Reachable, Examples) {
  Matrix A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  EXPECT_TRUE(reachable(A, B).is_full());
  EXPECT_TRUE(reachable(Matrix::Identity(2, 2), Matrix::Zero(2, 1)).is_zero());
  Matrix Ad = Matrix::Zero(2, 2);
  Ad(0, 0) = -1;
  Ad(1, 1) = -2;
  Matrix Bd(2, 1);
  Bd << 0, 1;
  const Subspace R = reachable(Ad, Bd);
  ASSERT_EQ(R.dim(), 1);
  EXPECT_TRUE(R.contains_vectors(e(2, 1), 1e-14));
}

TEST(Reachable, InvariantAndContainsB) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    // Block-triangular pair with a planted uncontrollable part.
    Matrix A = random_matrix(rng, 5, 5);
    A.bottomLeftCorner(2, 3).setZero();
    Matrix B = Matrix::Zero(5, 1);
    B.topRows(3) = random_matrix(rng, 3, 1);
    const Matrix T = testing::random_orthogonal(rng, 5);
    const Subspace R = reachable(T.transpose() * A * T, T.transpose() * B);
    EXPECT_EQ(R.dim(), 3);
    EXPECT_TRUE(R.contains_vectors(T.transpose() * A * T * R.basis(), 1e-9));
  }
}

TEST(Finiteness, UncontrolledIntegratorFailsAndRegularHolds) {
  const Problem P = testing::uncontrolled_integrator();
  const FinitenessVerdict v = finiteness_test(P, integrator_quadruple());
  EXPECT_FALSE(v.holds);
  EXPECT_TRUE(v.fragile);
  const Problem S = testing::scalar_regular();
  EXPECT_TRUE(finiteness_test(S, quadruple_of(S, factor_popov(S))).holds);
}

TEST(Finiteness, HurwitzAlwaysHolds) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix A = hurwitz_shift(random_matrix(rng, 3, 3), 0.2);
    const Matrix C = random_matrix(rng, 2, 3);
    const Problem P = validate_problem(A, random_matrix(rng, 3, 1), C.transpose() * C, Matrix::Zero(3, 1),
                                       Matrix::Zero(1, 1));
    EXPECT_TRUE(finiteness_test(P, quadruple_of(P, factor_popov(P))).holds);
  }
}

TEST(Geometry, FactorizationInvariance) {
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 20; ++trial) {
    const Problem P = testing::problem_of(testing::structured_instance(1000 + static_cast<std::uint64_t>(trial)));
    const PopovFactorization f = factor_popov(P);
    // Any [C D] with the same Gram matrix differs by a left orthogonal factor;
    // padding with zero rows also preserves it.
    const Matrix U = testing::random_orthogonal(rng, f.p() + 2);
    Matrix C = Matrix::Zero(f.p() + 2, P.n()), D = Matrix::Zero(f.p() + 2, P.m());
    C.topRows(f.p()) = f.C;
    D.topRows(f.p()) = f.D;
    const PopovFactorization g = make_factorization(P, U * C, U * D);
    const Quadruple qf = quadruple_of(P, f), qg = quadruple_of(P, g);
    EXPECT_TRUE(equal(vstar(qf), vstar(qg)));
    EXPECT_TRUE(equal(sstar(qf), sstar(qg)));
    EXPECT_TRUE(equal(rstar(qf), rstar(qg)));
  }
}

TEST(Geometry, StructuredTripleEquality) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Problem P = testing::problem_of(testing::structured_instance(1100 + seed));
    const PopovFactorization f = factor_popov(P);
    const Quadruple q = quadruple_of(P, f);
    const Subspace S = sstar(q), R = rstar(q);
    const Subspace RD = reach_deflected(P, input_split(P, f), deflected(P, f));
    EXPECT_TRUE(equal(S, R));
    EXPECT_TRUE(equal(R, RD));
    EXPECT_GE(S.dim(), 1);
  }
}

TEST(Summary, UncontrolledIntegratorDimensions) {
  const Problem P = testing::uncontrolled_integrator();
  const GeometricSummary g = summarize(P, factor_popov(P));
  EXPECT_EQ(g.vstar.dim(), 1);
  EXPECT_EQ(g.sstar.dim(), 1);
  EXPECT_EQ(g.rstar.dim(), 1);
  EXPECT_TRUE(g.sstar_eq_rstar);
  EXPECT_FALSE(g.finiteness);
}

}  // namespace
}  // namespace singlq
