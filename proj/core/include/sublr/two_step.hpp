#pragma once

#include "sublr/affine_map.hpp"
#include "sublr/linalg.hpp"
#include "sublr/map_design.hpp"

#include <optional>
#include <vector>

namespace sublr {

/// Stage one: m sampled columns observed as Y1 = L Z1 + scale * W1,
/// scale = sqrt(m M / P1), W1 entries N(0, sigma^2).
struct ColumnSample {
  std::vector<Index> z1;  // sampled column indices, 0-based, distinct
  Matrix y1;              // M x m
  double scale = 0.0;
  Matrix w1;              // realized W1 (kept for oracle diagnostics)

  Index observations() const { return y1.size(); }
};

struct SubspaceEstimate {
  Matrix u_hat;     // M x r_hat, semi-unitary
  Index r_hat = 0;
  Vector singvals;  // all singular values of Y1, descending
};

struct TwoStepConfig {
  Index m = 0;
  double p1 = 0.0;
  double p2 = 0.0;
  double sigma2 = 0.0;
  /// Known rank; when empty the rank is estimated from Y1.
  std::optional<Index> rank;
  /// Record realized error and the perturbation bounds (needs the true rank).
  bool oracle = true;
  /// True rank used by the bounds when `rank` is empty.
  std::optional<Index> oracle_rank;
};

struct TwoStepResult {
  Matrix l_hat;
  Matrix u_hat;
  Matrix q1_hat;
  Matrix q2_hat;
  std::vector<Index> perm;  // perm[k] = original column of [L1, L2] column k
  Index r_hat = 0;
  Index sample_count = 0;   // m M + r_hat (N - m)
  bool rank_zero = false;

  // Oracle-only diagnostics; NaN when unavailable.
  double realized_error = std::numeric_limits<double>::quiet_NaN();
  double subspace_distance = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  double wedin_bound = std::numeric_limits<double>::quiet_NaN();
  double total_bound = std::numeric_limits<double>::quiet_NaN();
  Warnings warnings;
};

/// Uniform sampling without replacement of m columns, then a noisy copy of them.
ColumnSample sample_columns(const Matrix& l, Index m, double p1, double sigma2, Rng& rng);

/// Top-r left singular vectors of Y1.
SubspaceEstimate estimate_subspace(const Matrix& y1, Index r);

/// r_hat = max{ i : s_i >= sigma sqrt(M) (1 + sqrt(m / M)) }, 0 if none qualify.
Index estimate_rank(const Vector& singvals, double sigma, Index m, Index rows);

/// Q1^ = U^T Y1.
Matrix coefficient_q1(const Matrix& u_hat, const Matrix& y1);

/// S2 = sqrt(P2 / (r (N - m))) (I_{N-m} (x) U^)^T over the M x (N - m) block L2.
/// Every row is a scaled column of U^ placed at one column of L2.
/// Returns nullopt when r_hat == 0.
std::optional<AffineMap> design_second_map(const Matrix& u_hat, double p2, Index remaining_cols);

/// Q2^ through the GLS estimator on A2 = S2 (I (x) U^).
Matrix coefficient_q2(const Matrix& u_hat, const AffineMap& s2, const Vector& y2,
                      const NoiseModel& noise);

/// Closed form for the design above: Q2^ = unvec(y2) / sqrt(P2 / (r (N - m))).
Matrix coefficient_q2_reshape(const Matrix& u_hat, const Vector& y2, double p2);

/// [z1, complement] in increasing order of the complement.
std::vector<Index> column_order(const std::vector<Index>& z1, Index cols);

/// L^ = U^ [Q1^, Q2^] P, with P the inverse of the column order `perm`.
Matrix assemble(const Matrix& u_hat, const Matrix& q1_hat, const Matrix& q2_hat,
                const std::vector<Index>& perm);

/// ||(I - U^ U^^T) U||_2, in [0, 1].
double subspace_distance(const Matrix& u_hat, const Matrix& u_true);

/// sqrt(m M / P1) ||W1||_2 / delta; NaN (with a warning) when delta <= 0.
double wedin_bound(const Matrix& w1, double delta, Index m, Index rows, double p1,
                   Warnings* warnings = nullptr);

/// sqrt(m M / P1)(||W1||_F + ||W1||_2 ||L||_F / delta) + sqrt(r (N - m) / P2) ||W2||_F.
double error_bound(const Matrix& w1, const Matrix& w2, const Matrix& l, double delta, Index m,
                   Index rows, Index rank, Index cols, double p1, double p2,
                   Warnings* warnings = nullptr);

/// delta = lambda_r(L1) - lambda_{r+1}(Y1) (lambda_{r+1} := 0 past the end).
double singular_gap(const Matrix& l1, const Vector& y1_singvals, Index rank);

/// Full pipeline against a simulated sensor holding L.
TwoStepResult run_two_step(const TwoStepConfig& config, const Matrix& l, Rng& rng);

/// m M + r (N - m).
constexpr Index two_step_sample_count(Index rows, Index cols, Index rank, Index m) {
  return m * rows + rank * (cols - m);
}

/// Stage-one selector rows (amplitude sqrt(P1 / (m M))) stacked over the stage-two
/// design, both expressed on the full M x N matrix.
AffineMap two_step_operator(const std::vector<Index>& z1, const Matrix& u_hat, Index rows,
                            Index cols, double p1, double p2);

}  // namespace sublr
