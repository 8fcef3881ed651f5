#include "sublr/baselines.hpp"
#include "sublr/errors.hpp"
#include "sublr/estimator.hpp"
#include "sublr/experiments.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace sublr;

namespace {

double prox_objective(const Matrix& z, const Matrix& m, double theta) {
  return theta * singular_values(z).sum() + 0.5 * (z - m).squaredNorm();
}

}  // namespace

TEST(Svt, ZeroThresholdIsIdentity) {
  Rng rng(1);
  const Matrix m = standard_normal(4, 6, rng);
  EXPECT_LE((svt(m, 0.0) - m).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Svt, LargeThresholdGivesZero) {
  Rng rng(2);
  const Matrix m = standard_normal(5, 3, rng);
  EXPECT_LE(svt(m, spectral_norm(m)).norm(), 1e-12);
  EXPECT_EQ(svt(m, 10.0 * spectral_norm(m)), Matrix::Zero(5, 3));
}

TEST(Svt, DiagonalHandExample) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 3.0;
  m(1, 1) = 1.0;
  Matrix want = Matrix::Zero(2, 2);
  want(0, 0) = 1.0;
  EXPECT_LE((svt(m, 2.0) - want).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(svt(m, -1.0), DomainError);
}

TEST(Svt, IsProximalMinimizer) {
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const Matrix m = standard_normal(4, 5, rng);
    const double theta = 0.5 + 0.1 * k;
    const Matrix z = svt(m, theta);
    const double best = prox_objective(z, m, theta);
    for (int j = 0; j < 20; ++j)
      ASSERT_GE(prox_objective(z + 1e-3 * standard_normal(4, 5, rng), m, theta), best - 1e-12);
  }
}

TEST(Nnm, IdentityMapReducesToSvt) {
  // ||L||_* + tau ||y - L||^2 is minimized by svt(Y, 1 / (2 tau)).
  Rng rng(4);
  const AffineMap map(Matrix::Identity(12, 12), 3, 4);
  const Vector y = standard_normal(12, rng);
  SolverOptions opt;
  opt.tau = 0.7;
  opt.tol = 1e-12;
  opt.max_iters = 5000;
  const SolverResult res = nnm_solve(map, y, opt);
  EXPECT_LE((res.estimate - svt(unvec(y, 3, 4), 1.0 / 1.4)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Nnm, OverdeterminedRankOneWithLargeTau) {
  Matrix s(6, 4);
  s << Matrix::Identity(4, 4), Matrix::Identity(2, 4);
  const AffineMap map(s, 2, 2);
  Matrix l(2, 2);
  l << 1.0, 2.0, 0.5, 1.0;
  SolverOptions opt;
  opt.tau = 1e3;
  opt.tol = 1e-12;
  opt.max_iters = 20000;
  const SolverResult res = nnm_solve(map, map.apply(l), opt);
  EXPECT_LE(nmse(res.estimate, l), 1e-3);
}

TEST(Nnm, ZeroObservationGivesZero) {
  Rng rng(6);
  const AffineMap map = gaussian_random(10, 3, 4, rng);
  SolverOptions opt;
  opt.tau = 1.0;
  const SolverResult res = nnm_solve(map, Vector::Zero(10), opt);
  EXPECT_EQ(res.estimate, Matrix::Zero(3, 4));
  EXPECT_TRUE(res.converged);
}

TEST(Nnm, ObjectiveIsMonotone) {
  Rng rng(7);
  const AffineMap map = gaussian_random(60, 5, 6, rng);
  const Vector y = map.apply(generate_low_rank(5, 6, 2, rng)) + 0.1 * standard_normal(60, rng);
  SolverOptions opt;
  opt.tau = default_nnm_tau(map, 0.01);
  opt.max_iters = 300;
  const SolverResult res = nnm_solve(map, y, opt);
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    ASSERT_LE(res.trace[i], res.trace[i - 1] * (1.0 + 1e-9)) << "iteration " << i;
}

TEST(Nnm, RejectsOversizedStep) {
  Rng rng(8);
  const AffineMap map = gaussian_random(10, 3, 4, rng);
  SolverOptions opt;
  opt.tau = 1.0;
  opt.step = 10.0 / operator_norm_squared(map);
  EXPECT_THROW(nnm_solve(map, Vector::Ones(10), opt), DomainError);
  opt.tau.reset();
  opt.step.reset();
  EXPECT_THROW(nnm_solve(map, Vector::Ones(10), opt), DomainError);
}

TEST(Nnm, Deterministic) {
  Rng rng(9);
  const AffineMap map = gaussian_random(30, 4, 5, rng);
  const Vector y = standard_normal(30, rng);
  SolverOptions opt;
  opt.tau = 2.0;
  opt.max_iters = 50;
  EXPECT_EQ(nnm_solve(map, y, opt).estimate, nnm_solve(map, y, opt).estimate);
}

TEST(Nnm, DefaultTauNeedsPositiveNoise) {
  Rng rng(10);
  const AffineMap map = gaussian_random(10, 3, 4, rng);
  EXPECT_THROW(default_nnm_tau(map, 0.0), DomainError);
  EXPECT_GT(default_nnm_tau(map, 0.1), default_nnm_tau(map, 1.0));
}

TEST(OperatorNorm, MatchesDenseEigenvalue) {
  Rng rng(11);
  const AffineMap map = gaussian_random(15, 3, 4, rng);
  const double want = singular_values(map.stacked())(0);
  EXPECT_NEAR(operator_norm_squared(map), want * want, 1e-8 * want * want);
}

TEST(Mf, NoiselessRankTwoRecovery) {
  Rng rng(12);
  const Matrix l = generate_low_rank(8, 10, 2, rng);
  const AffineMap map = gaussian_random(80, 8, 10, rng);
  SolverOptions opt;
  opt.rank = 2;
  opt.tol = 1e-12;
  opt.max_iters = 2000;
  const SolverResult res = mf_solve(map, map.apply(l), opt);
  EXPECT_LE(nmse(res.estimate, l), 1e-6);
}

TEST(Mf, ZeroObservationGivesZero) {
  Rng rng(13);
  const AffineMap map = gaussian_random(40, 4, 5, rng);
  SolverOptions opt;
  opt.rank = 2;
  const SolverResult res = mf_solve(map, Vector::Zero(40), opt);
  EXPECT_EQ(res.estimate, Matrix::Zero(4, 5));
  EXPECT_TRUE(res.converged);
}

TEST(Mf, ResidualIsMonotone) {
  Rng rng(14);
  const AffineMap map = gaussian_random(70, 6, 7, rng);
  const Vector y = map.apply(generate_low_rank(6, 7, 2, rng)) + 0.3 * standard_normal(70, rng);
  SolverOptions opt;
  opt.rank = 2;
  opt.max_iters = 200;
  const SolverResult res = mf_solve(map, y, opt);
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    ASSERT_LE(res.trace[i], res.trace[i - 1] * (1.0 + 1e-9)) << "sweep " << i;
}

TEST(Mf, WarnsBelowDegreesOfFreedom) {
  Rng rng(15);
  const AffineMap map = gaussian_random(20, 6, 7, rng);  // 2 (6 + 7 - 2) = 22 > 20
  SolverOptions opt;
  opt.rank = 2;
  opt.max_iters = 20;
  Warnings warnings;
  try {
    mf_solve(map, standard_normal(20, rng), opt, &warnings);
  } catch (const NumericalError&) {
  }
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("degrees of freedom"), std::string::npos);
  opt.rank = 7;
  EXPECT_THROW(mf_solve(map, Vector::Zero(20), opt), DomainError);
}
