#include "sublr/errors.hpp"
#include "sublr/estimator.hpp"
#include "sublr/experiments.hpp"
#include "sublr/two_step.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace sublr;

namespace {

Matrix low_rank(Index rows, Index cols, Index rank, std::uint64_t seed) {
  Rng rng(seed);
  return generate_low_rank(rows, cols, rank, rng);
}

Matrix columns(const Matrix& l, const std::vector<Index>& idx) {
  Matrix out(l.rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = l.col(idx[k]);
  return out;
}

}  // namespace

TEST(SampleColumns, NoiselessSampleIsExact) {
  const Matrix l = low_rank(6, 10, 2, 1);
  Rng rng(2);
  const ColumnSample s = sample_columns(l, 4, 100.0, 0.0, rng);
  EXPECT_EQ(s.y1, columns(l, s.z1));
  EXPECT_EQ(std::set<Index>(s.z1.begin(), s.z1.end()).size(), 4u);
  EXPECT_DOUBLE_EQ(s.scale, std::sqrt(4.0 * 6.0 / 100.0));
  EXPECT_EQ(s.observations(), 24);
}

TEST(SampleColumns, AllColumnsIsPermutation) {
  const Matrix l = low_rank(3, 7, 2, 3);
  Rng rng(4);
  const ColumnSample s = sample_columns(l, 7, 1.0, 0.0, rng);
  std::vector<Index> sorted = s.z1;
  std::sort(sorted.begin(), sorted.end());
  for (Index j = 0; j < 7; ++j) EXPECT_EQ(sorted[static_cast<std::size_t>(j)], j);
}

TEST(SampleColumns, NoiseScaleMonteCarlo) {
  const Matrix l = Matrix::Zero(20, 50);
  Rng rng(5);
  double ss = 0.0;
  long long count = 0;
  while (count < 100000) {
    const ColumnSample s = sample_columns(l, 9, 1000.0, 1.0, rng);
    ss += s.y1.squaredNorm();
    count += s.y1.size();
  }
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(count)), std::sqrt(9.0 * 20.0 / 1000.0),
              0.03 * std::sqrt(0.18));
}

TEST(SampleColumns, RejectsBadArguments) {
  Rng rng(6);
  const Matrix l = Matrix::Zero(3, 4);
  EXPECT_THROW(sample_columns(l, 5, 1.0, 0.0, rng), DomainError);
  EXPECT_THROW(sample_columns(l, 2, 0.0, 0.0, rng), DomainError);
}

TEST(EstimateSubspace, NoiselessSpanIsExact) {
  const Matrix l1 = low_rank(8, 5, 3, 7);
  const SubspaceEstimate est = estimate_subspace(l1, 3);
  const ThinSvd svd = thin_svd(l1);
  EXPECT_LE(subspace_distance(est.u_hat, svd.u.leftCols(3)), 1e-8);
  EXPECT_LE(orthonormality_defect(est.u_hat), 1e-12);
  for (Index i = 1; i < est.singvals.size(); ++i) EXPECT_LE(est.singvals(i), est.singvals(i - 1));
}

TEST(EstimateSubspace, IdentityInputGivesBasis) {
  const SubspaceEstimate est = estimate_subspace(Matrix::Identity(4, 4), 4);
  EXPECT_LE(orthonormality_defect(est.u_hat), 1e-12);
  EXPECT_THROW(estimate_subspace(Matrix::Identity(4, 3), 4), DomainError);
}

TEST(EstimateRank, NoiselessExactRank) {
  const Matrix l1 = low_rank(20, 9, 6, 8);
  EXPECT_EQ(estimate_rank(singular_values(l1), 0.0, 9, 20), 6);
}

TEST(EstimateRank, PlantedSpectrumWellAboveThreshold) {
  const Index rows = 20, m = 9, r = 6;
  const double sigma = 0.1;
  const double tau = sigma * std::sqrt(20.0) * (1.0 + std::sqrt(9.0 / 20.0));
  Rng rng(9);
  int hits = 0;
  for (int t = 0; t < 100; ++t) {
    const Matrix u = oracle::random_orthonormal(rows, r, rng);
    const Matrix v = oracle::random_orthonormal(m, r, rng);
    const Vector s = Vector::LinSpaced(r, 20.0 * tau, 10.0 * tau);
    const Matrix y = u * s.asDiagonal() * v.transpose() + sigma * standard_normal(rows, m, rng);
    hits += estimate_rank(singular_values(y), sigma, m, rows) == r;
  }
  EXPECT_GE(hits, 99);
}

TEST(EstimateRank, ZeroMatrixThroughStageOne) {
  // Stage one scales the noise by sqrt(m M / P1), well below the threshold at P1 = M N.
  TwoStepConfig c;
  c.m = 9;
  c.p1 = c.p2 = 1000.0;
  c.sigma2 = 1.0;
  int zeros = 0;
  for (int t = 0; t < 200; ++t) {
    Rng rng(10 + static_cast<std::uint64_t>(t));
    zeros += run_two_step(c, Matrix::Zero(20, 50), rng).r_hat == 0;
  }
  EXPECT_GE(zeros, 190);
}

TEST(EstimateRank, UnitScaleNoiseSitsAtTheEdge) {
  // The threshold equals the asymptotic top singular value sqrt(M) + sqrt(m) of pure
  // noise, so r_hat = 0 only about as often as a Tracy-Widom draw is negative.
  Rng rng(11);
  int zeros = 0;
  for (int t = 0; t < 400; ++t) zeros += estimate_rank(singular_values(standard_normal(20, 9, rng)), 1.0, 9, 20) == 0;
  EXPECT_GT(zeros, 240);
  EXPECT_LT(zeros, 390);
}

TEST(CoefficientQ1, ProductAndEdgeCases) {
  const Matrix l1 = low_rank(8, 5, 2, 11);
  const Matrix u = estimate_subspace(l1, 2).u_hat;
  EXPECT_LE((u * coefficient_q1(u, l1) - l1).cwiseAbs().maxCoeff(), 1e-8);
  Matrix e1 = Matrix::Zero(3, 1);
  e1(0) = 1.0;
  Matrix orth = Matrix::Zero(3, 2);
  orth(1, 0) = orth(2, 1) = 1.0;
  EXPECT_EQ(coefficient_q1(e1, orth), Matrix::Zero(1, 2));
  Rng rng(12);
  const Matrix y = standard_normal(8, 5, rng);
  EXPECT_LE((coefficient_q1(u, y) - u.transpose() * y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SecondMap, HandExpandedSingleMeasurement) {
  Matrix u = Matrix::Zero(2, 1);
  u(0) = 1.0;
  const auto map = design_second_map(u, 4.0, 1);
  ASSERT_TRUE(map.has_value());
  EXPECT_EQ(map->observations(), 1);
  Matrix x = Matrix::Zero(2, 1);
  x(0, 0) = 2.0;
  EXPECT_EQ(map->measurement_matrix(0), x);
}

TEST(SecondMap, PowerAndRestriction) {
  Rng rng(13);
  const Matrix u = oracle::random_orthonormal(20, 6, rng);
  const auto map = design_second_map(u, 1000.0, 41);
  ASSERT_TRUE(map.has_value());
  EXPECT_NEAR(map->stacked().squaredNorm(), 1000.0, 1e-8);
  const Matrix a = restrict_to_subspace(map->stacked(), SubspaceBasis(u));
  const double amp = std::sqrt(1000.0 / (6.0 * 41.0));
  EXPECT_LE((a - amp * Matrix::Identity(246, 246)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_FALSE(design_second_map(Matrix(20, 0), 1000.0, 41).has_value());
}

TEST(CoefficientQ2, NoiselessAndTwoPaths) {
  Rng rng(14);
  const Matrix l2 = low_rank(10, 7, 3, 15);
  const Matrix u = estimate_subspace(l2, 3).u_hat;
  const AffineMap s2 = *design_second_map(u, 50.0, 7);
  const Vector clean = s2.apply(l2);
  EXPECT_LE((coefficient_q2(u, s2, clean, NoiseModel::iid(21, 0.0)) - u.transpose() * l2).cwiseAbs().maxCoeff(),
            1e-10);
  for (int k = 0; k < 10; ++k) {
    const Vector y2 = clean + standard_normal(21, rng);
    const Matrix gls = coefficient_q2(u, s2, y2, NoiseModel::iid(21, 1.0));
    ASSERT_LE((gls - coefficient_q2_reshape(u, y2, 50.0)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(CoefficientQ2, NoiseVarianceMonteCarlo) {
  Rng rng(16);
  const Index r = 6, rest = 41;
  const Matrix u = oracle::random_orthonormal(20, r, rng);
  const double p2 = 1000.0, sigma2 = 0.5;
  const double want = r * rest / p2 * sigma2;
  double ss = 0.0;
  long long count = 0;
  while (count < 100000) {
    const Vector n2 = std::sqrt(sigma2) * standard_normal(r * rest, rng);
    const Matrix q = coefficient_q2_reshape(u, n2, p2);  // L2 = 0
    ss += q.squaredNorm();
    count += q.size();
  }
  EXPECT_NEAR(ss / static_cast<double>(count), want, 0.05 * want);
}

TEST(Assemble, IdentityOrderAndRoundTrip) {
  Rng rng(17);
  const Matrix u = oracle::random_orthonormal(5, 2, rng);
  const Matrix q1 = standard_normal(2, 3, rng);
  const Matrix q2 = standard_normal(2, 4, rng);
  Matrix both(2, 7);
  both << q1, q2;
  EXPECT_LE((assemble(u, q1, q2, {0, 1, 2, 3, 4, 5, 6}) - u * both).cwiseAbs().maxCoeff(), 1e-14);

  const std::vector<Index> z1{5, 0, 3};
  const std::vector<Index> order = column_order(z1, 7);
  EXPECT_EQ(order, (std::vector<Index>{5, 0, 3, 1, 2, 4, 6}));
  const Matrix l_hat = assemble(u, q1, q2, order);
  EXPECT_LE((columns(l_hat, z1) - u * q1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(assemble(u, q1, q2, {0, 0, 1, 2, 3, 4, 5}), DomainError);
  EXPECT_THROW(column_order({1, 1}, 4), DomainError);
}

TEST(SubspaceDistance, ClosedForms) {
  Matrix e1 = Matrix::Zero(3, 1), e2 = Matrix::Zero(3, 1);
  e1(0) = 1.0;
  e2(1) = 1.0;
  EXPECT_DOUBLE_EQ(subspace_distance(e1, e1), 0.0);
  EXPECT_DOUBLE_EQ(subspace_distance(e1, e2), 1.0);
  for (double theta : {0.1, 0.7, 1.3, 2.9}) {
    const Matrix u = std::cos(theta) * e1 + std::sin(theta) * e2;
    EXPECT_NEAR(subspace_distance(e1, u), std::abs(std::sin(theta)), 1e-10);
  }
}

TEST(Bounds, ZeroNoiseAndScaling) {
  Rng rng(18);
  const Matrix w1 = standard_normal(20, 9, rng);
  EXPECT_DOUBLE_EQ(wedin_bound(Matrix::Zero(20, 9), 1.0, 9, 20, 1000.0), 0.0);
  EXPECT_NEAR(wedin_bound(w1, 2.0, 9, 20, 2000.0), wedin_bound(w1, 2.0, 9, 20, 1000.0) / std::sqrt(2.0),
              1e-12);
  const Matrix l = low_rank(20, 50, 6, 19);
  EXPECT_DOUBLE_EQ(error_bound(Matrix::Zero(20, 9), Matrix::Zero(6, 41), l, 1.0, 9, 20, 6, 50, 1e3, 1e3), 0.0);
  const Matrix w2 = standard_normal(6, 41, rng);
  const double with = error_bound(w1, w2, l, 2.0, 9, 20, 6, 50, 1e3, 1e3);
  const double without = error_bound(w1, Matrix::Zero(6, 41), l, 2.0, 9, 20, 6, 50, 1e3, 1e3);
  EXPECT_NEAR(with - without, std::sqrt(6.0 * 41.0 / 1e3) * w2.norm(), 1e-12);
}

TEST(Bounds, ClosedGapIsUndefined) {
  Warnings warnings;
  EXPECT_TRUE(std::isnan(wedin_bound(Matrix::Ones(2, 2), 0.0, 2, 2, 1.0, &warnings)));
  EXPECT_TRUE(std::isnan(error_bound(Matrix::Ones(2, 2), Matrix::Ones(1, 1), Matrix::Ones(2, 3), -1.0, 2, 2, 1,
                                     3, 1.0, 1.0, &warnings)));
  EXPECT_EQ(warnings.size(), 2u);
}

TEST(Bounds, HoldOnSeededTrials) {
  TwoStepConfig c;
  c.m = 9;
  c.p1 = c.p2 = 1000.0;
  c.rank = 6;
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    c.sigma2 = std::vector<double>{0.01, 0.1, 1.0}[static_cast<std::size_t>(t % 3)];
    const Matrix l = low_rank(20, 50, 6, 1000 + static_cast<std::uint64_t>(t));
    Rng rng(2000 + static_cast<std::uint64_t>(t));
    const TwoStepResult res = run_two_step(c, l, rng);
    if (std::isnan(res.wedin_bound)) continue;
    ++checked;
    ASSERT_LE(res.subspace_distance, res.wedin_bound) << "trial " << t;
    ASSERT_LE(res.realized_error, res.total_bound) << "trial " << t;
  }
  EXPECT_GE(checked, 90);
}

TEST(RunTwoStep, NoiselessDegreesOfFreedomIsExact) {
  TwoStepConfig c;
  c.m = 6;
  c.p1 = c.p2 = 1000.0;
  c.sigma2 = 0.0;
  c.rank = 6;
  const Matrix l = low_rank(20, 50, 6, 21);
  Rng rng(22);
  const TwoStepResult res = run_two_step(c, l, rng);
  EXPECT_EQ(res.sample_count, 384);
  EXPECT_EQ(res.sample_count, (50 + 20 - 6) * 6);
  EXPECT_LE(nmse(res.l_hat, l), 1e-16 * 100);
  EXPECT_LE(res.realized_error, 1e-8);
}

TEST(RunTwoStep, SampleAccountingWithEstimatedRank) {
  TwoStepConfig c;
  c.m = 9;
  c.p1 = c.p2 = 1000.0;
  c.sigma2 = 0.01;
  c.oracle_rank = 6;
  const Matrix l = low_rank(20, 50, 6, 23);
  Rng rng(24);
  const TwoStepResult res = run_two_step(c, l, rng);
  EXPECT_EQ(res.sample_count, 9 * 20 + res.r_hat * 41);
  EXPECT_EQ(res.r_hat, 6);
  static_assert(two_step_sample_count(20, 50, 6, 9) == 426);
}

TEST(RunTwoStep, ZeroMatrixGivesRankZeroFlag) {
  TwoStepConfig c;
  c.m = 9;
  c.p1 = c.p2 = 1000.0;
  c.sigma2 = 1.0;
  Rng rng(25);
  const TwoStepResult res = run_two_step(c, Matrix::Zero(20, 50), rng);
  EXPECT_EQ(res.r_hat, 0);
  EXPECT_TRUE(res.rank_zero);
  EXPECT_EQ(res.l_hat, Matrix::Zero(20, 50));
  EXPECT_EQ(res.sample_count, 180);
}

TEST(RunTwoStep, ErrorFallsWithNoise) {
  TwoStepConfig c;
  c.m = 9;
  c.p1 = c.p2 = 1000.0;
  c.rank = 6;
  double previous = std::numeric_limits<double>::infinity();
  for (double s2 : {1.0, 0.3, 0.1, 0.03, 0.01, 0.003}) {
    c.sigma2 = s2;
    double acc = 0.0;
    for (int t = 0; t < 50; ++t) {
      const Matrix l = low_rank(20, 50, 6, 3000 + static_cast<std::uint64_t>(t));
      Rng rng(4000 + static_cast<std::uint64_t>(t));
      acc += nmse(run_two_step(c, l, rng).l_hat, l);
    }
    acc /= 50;
    EXPECT_LT(acc, previous * 1.1) << "sigma^2 = " << s2;
    previous = acc;
  }
}

TEST(RunTwoStep, DeterministicPerSeed) {
  TwoStepConfig c;
  c.m = 9;
  c.p1 = c.p2 = 1000.0;
  c.sigma2 = 0.1;
  const Matrix l = low_rank(20, 50, 6, 26);
  Rng a(27), b(27);
  EXPECT_EQ(run_two_step(c, l, a).l_hat, run_two_step(c, l, b).l_hat);
}

TEST(TwoStepOperator, ReproducesBothStagesNoiselessly) {
  const Matrix l = low_rank(6, 8, 2, 28);
  Rng rng(29);
  const ColumnSample s = sample_columns(l, 3, 10.0, 0.0, rng);
  const Matrix u = estimate_subspace(s.y1, 2).u_hat;
  const AffineMap op = two_step_operator(s.z1, u, 6, 8, 10.0, 20.0);
  EXPECT_EQ(op.observations(), 3 * 6 + 2 * 5);
  EXPECT_NEAR(op.stacked().squaredNorm(), 30.0, 1e-10);
  const Vector y = op.apply(l);
  const double a1 = std::sqrt(10.0 / 18.0);
  const Vector stage1 = y.head(18) / a1;
  EXPECT_LE((stage1 - Eigen::Map<const Vector>(s.y1.data(), 18)).cwiseAbs().maxCoeff(), 1e-12);
}
