#include "sublr/two_step.hpp"

#include "sublr/errors.hpp"
#include "sublr/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sublr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix select_columns(const Matrix& l, const std::vector<Index>& cols, std::size_t first,
                      std::size_t count) {
  Matrix out(l.rows(), static_cast<Index>(count));
  for (std::size_t k = 0; k < count; ++k) out.col(static_cast<Index>(k)) = l.col(cols[first + k]);
  return out;
}

void check_permutation(const std::vector<Index>& perm, Index n) {
  require(static_cast<Index>(perm.size()) == n, "assemble: permutation length must equal N");
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index j : perm) {
    require(j >= 0 && j < n && !seen[static_cast<std::size_t>(j)],
            "assemble: column order is not a permutation");
    seen[static_cast<std::size_t>(j)] = 1;
  }
}

}  // namespace

ColumnSample sample_columns(const Matrix& l, Index m, double p1, double sigma2, Rng& rng) {
  const Index n = l.cols();
  require(m >= 1, "sample_columns: m must be >= 1");
  require(m <= n, "sample_columns: m = " + std::to_string(m) + " exceeds N = " + std::to_string(n));
  require(p1 > 0.0, "sample_columns: P1 must be positive");
  require(sigma2 >= 0.0, "sample_columns: sigma^2 must be >= 0");

  // Partial Fisher-Yates: the first m entries are a uniform draw without replacement.
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index k = 0; k < m; ++k) {
    std::uniform_int_distribution<Index> pick(k, n - 1);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
  }

  ColumnSample out;
  out.z1.assign(pool.begin(), pool.begin() + m);
  out.scale = std::sqrt(static_cast<double>(m * l.rows()) / p1);
  out.w1 = std::sqrt(sigma2) * standard_normal(l.rows(), m, rng);
  out.y1 = select_columns(l, out.z1, 0, out.z1.size()) + out.scale * out.w1;
  return out;
}

SubspaceEstimate estimate_subspace(const Matrix& y1, Index r) {
  require(r >= 1 && r <= std::min(y1.rows(), y1.cols()),
          "estimate_subspace: rank must satisfy 1 <= r <= min(M, m)");
  const ThinSvd svd = thin_svd(y1);
  SubspaceEstimate out;
  out.u_hat = svd.u.leftCols(r);
  out.r_hat = r;
  out.singvals = svd.s;
  return out;
}

Index estimate_rank(const Vector& singvals, double sigma, Index m, Index rows) {
  require(sigma >= 0.0, "estimate_rank: sigma must be >= 0");
  require(m >= 1 && rows >= 1, "estimate_rank: m and M must be positive");
  const double tau = sigma * std::sqrt(static_cast<double>(rows)) *
                     (1.0 + std::sqrt(static_cast<double>(m) / static_cast<double>(rows)));
  // Values at rounding level count as zero so that sigma = 0 still yields the exact rank.
  const double floor = singvals.size() > 0
                           ? static_cast<double>(std::max(rows, m)) *
                                 std::numeric_limits<double>::epsilon() * singvals(0)
                           : 0.0;
  Index r_hat = 0;
  for (Index i = 0; i < singvals.size(); ++i)
    if (singvals(i) >= tau && singvals(i) > floor) r_hat = i + 1;
  return r_hat;
}

Matrix coefficient_q1(const Matrix& u_hat, const Matrix& y1) {
  require_dims(u_hat.rows() == y1.rows(), "coefficient_q1: U and Y1 must have M rows");
  return u_hat.transpose() * y1;
}

std::optional<AffineMap> design_second_map(const Matrix& u_hat, double p2, Index remaining_cols) {
  require(p2 > 0.0, "design_second_map: P2 must be positive");
  const Index r = u_hat.cols();
  const Index rows = u_hat.rows();
  if (r == 0 || remaining_cols == 0) return std::nullopt;

  const double amplitude = std::sqrt(p2 / static_cast<double>(r * remaining_cols));
  Matrix s = Matrix::Zero(r * remaining_cols, rows * remaining_cols);
  for (Index j = 0; j < remaining_cols; ++j)
    s.block(j * r, j * rows, r, rows) = amplitude * u_hat.transpose();
  return AffineMap(std::move(s), rows, remaining_cols, p2);
}

Matrix coefficient_q2(const Matrix& u_hat, const AffineMap& s2, const Vector& y2,
                      const NoiseModel& noise) {
  require_dims(s2.rows() == u_hat.rows(), "coefficient_q2: map and basis disagree on M");
  const Matrix a2 = restrict_to_subspace(s2.stacked(), SubspaceBasis(u_hat));
  const GlsEstimator gls(a2, noise);
  return unvec(gls.estimate(y2), u_hat.cols(), s2.cols());
}

Matrix coefficient_q2_reshape(const Matrix& u_hat, const Vector& y2, double p2) {
  const Index r = u_hat.cols();
  require(r >= 1, "coefficient_q2_reshape: empty basis");
  require_dims(y2.size() % r == 0, "coefficient_q2_reshape: length must be a multiple of r");
  const Index cols = y2.size() / r;
  const double amplitude = std::sqrt(p2 / static_cast<double>(r * cols));
  return unvec(y2 / amplitude, r, cols);
}

std::vector<Index> column_order(const std::vector<Index>& z1, Index cols) {
  std::vector<char> taken(static_cast<std::size_t>(cols), 0);
  for (Index j : z1) {
    require(j >= 0 && j < cols && !taken[static_cast<std::size_t>(j)],
            "column_order: sampled indices must be distinct and within 0..N-1");
    taken[static_cast<std::size_t>(j)] = 1;
  }
  std::vector<Index> order = z1;
  for (Index j = 0; j < cols; ++j)
    if (!taken[static_cast<std::size_t>(j)]) order.push_back(j);
  return order;
}

Matrix assemble(const Matrix& u_hat, const Matrix& q1_hat, const Matrix& q2_hat,
                const std::vector<Index>& perm) {
  require_dims(q1_hat.rows() == u_hat.cols() && q2_hat.rows() == u_hat.cols(),
               "assemble: coefficient rows must equal the basis dimension");
  const Index n = q1_hat.cols() + q2_hat.cols();
  check_permutation(perm, n);
  Matrix l_hat(u_hat.rows(), n);
  const Matrix b1 = u_hat * q1_hat;
  const Matrix b2 = u_hat * q2_hat;
  for (Index k = 0; k < q1_hat.cols(); ++k) l_hat.col(perm[static_cast<std::size_t>(k)]) = b1.col(k);
  for (Index k = 0; k < q2_hat.cols(); ++k)
    l_hat.col(perm[static_cast<std::size_t>(q1_hat.cols() + k)]) = b2.col(k);
  return l_hat;
}

double subspace_distance(const Matrix& u_hat, const Matrix& u_true) {
  require_dims(u_hat.rows() == u_true.rows(), "subspace_distance: bases must share M");
  const Matrix residual = u_true - u_hat * (u_hat.transpose() * u_true);
  return std::clamp(spectral_norm(residual), 0.0, 1.0);
}

double wedin_bound(const Matrix& w1, double delta, Index m, Index rows, double p1,
                   Warnings* warnings) {
  require(p1 > 0.0, "wedin_bound: P1 must be positive");
  if (!(delta > 0.0)) {
    if (warnings) warnings->push_back("wedin_bound: singular value gap closed (delta <= 0)");
    return kNaN;
  }
  const double scale = std::sqrt(static_cast<double>(m * rows) / p1);
  return scale * spectral_norm(w1) / delta;
}

double error_bound(const Matrix& w1, const Matrix& w2, const Matrix& l, double delta, Index m,
                   Index rows, Index rank, Index cols, double p1, double p2,
                   Warnings* warnings) {
  require(p1 > 0.0 && p2 > 0.0, "error_bound: powers must be positive");
  if (!(delta > 0.0)) {
    if (warnings) warnings->push_back("error_bound: singular value gap closed (delta <= 0)");
    return kNaN;
  }
  const double s1 = std::sqrt(static_cast<double>(m * rows) / p1);
  const double s2 = std::sqrt(static_cast<double>(rank * (cols - m)) / p2);
  return s1 * (w1.norm() + spectral_norm(w1) * l.norm() / delta) + s2 * w2.norm();
}

double singular_gap(const Matrix& l1, const Vector& y1_singvals, Index rank) {
  require(rank >= 1, "singular_gap: rank must be >= 1");
  const Vector s = singular_values(l1);
  require(rank <= s.size(), "singular_gap: rank exceeds min(M, m)");
  const double next = rank < y1_singvals.size() ? y1_singvals(rank) : 0.0;
  return s(rank - 1) - next;
}

TwoStepResult run_two_step(const TwoStepConfig& config, const Matrix& l, Rng& rng) {
  const Index rows = l.rows();
  const Index cols = l.cols();
  require(config.p1 > 0.0 && config.p2 > 0.0, "two_step: P1 and P2 must be positive");
  require(config.sigma2 >= 0.0, "two_step: sigma^2 must be >= 0");

  TwoStepResult out;
  const ColumnSample sample = sample_columns(l, config.m, config.p1, config.sigma2, rng);
  out.perm = column_order(sample.z1, cols);
  const Index remaining = cols - config.m;

  Index r_hat = 0;
  if (config.rank) {
    r_hat = *config.rank;
    require(r_hat >= 1 && r_hat <= std::min(rows, config.m),
            "two_step: rank must satisfy 1 <= r <= min(M, m)");
  } else {
    r_hat = estimate_rank(singular_values(sample.y1), std::sqrt(config.sigma2), config.m, rows);
  }
  out.r_hat = r_hat;
  out.sample_count = two_step_sample_count(rows, cols, r_hat, config.m);

  if (r_hat == 0) {
    out.rank_zero = true;
    out.l_hat = Matrix::Zero(rows, cols);
    out.u_hat = Matrix(rows, 0);
    out.q1_hat = Matrix(0, config.m);
    out.q2_hat = Matrix(0, remaining);
    out.warnings.push_back("two_step: estimated rank is 0; returning the zero matrix");
    if (config.oracle) out.realized_error = l.norm();
    return out;
  }

  const SubspaceEstimate est = estimate_subspace(sample.y1, r_hat);
  out.u_hat = est.u_hat;
  out.q1_hat = coefficient_q1(est.u_hat, sample.y1);

  Matrix w2(r_hat, remaining);
  if (remaining > 0) {
    const AffineMap s2 = *design_second_map(est.u_hat, config.p2, remaining);
    const Matrix l2 = select_columns(l, out.perm, static_cast<std::size_t>(config.m),
                                     static_cast<std::size_t>(remaining));
    const NoiseModel noise2 = NoiseModel::iid(s2.observations(), config.sigma2);
    const Vector n2 = std::sqrt(config.sigma2) * standard_normal(s2.observations(), rng);
    const Vector y2 = s2.apply(l2) + n2;
    out.q2_hat = coefficient_q2(est.u_hat, s2, y2, noise2);
    w2 = unvec(n2, r_hat, remaining);
  } else {
    out.q2_hat = Matrix(r_hat, 0);
  }
  out.l_hat = assemble(est.u_hat, out.q1_hat, out.q2_hat, out.perm);

  if (!config.oracle) return out;
  out.realized_error = (out.l_hat - l).norm();

  const std::optional<Index> true_rank = config.rank ? config.rank : config.oracle_rank;
  if (!true_rank) {
    out.warnings.push_back("two_step: true rank unknown; bounds not computed");
    return out;
  }
  if (*true_rank != r_hat) {
    out.warnings.push_back("two_step: estimated rank differs from the true rank; bounds skipped");
    return out;
  }
  const Matrix l1 = select_columns(l, sample.z1, 0, sample.z1.size());
  const ThinSvd l1_svd = thin_svd(l1);
  out.subspace_distance = subspace_distance(est.u_hat, l1_svd.u.leftCols(r_hat));
  out.gap = singular_gap(l1, est.singvals, r_hat);
  out.wedin_bound = wedin_bound(sample.w1, out.gap, config.m, rows, config.p1, &out.warnings);
  out.total_bound = error_bound(sample.w1, w2, l, out.gap, config.m, rows, r_hat, cols, config.p1,
                                config.p2, &out.warnings);
  return out;
}

AffineMap two_step_operator(const std::vector<Index>& z1, const Matrix& u_hat, Index rows,
                            Index cols, double p1, double p2) {
  const Index m = static_cast<Index>(z1.size());
  require(m >= 1 && p1 > 0.0, "two_step_operator: need sampled columns and P1 > 0");
  const std::vector<Index> order = column_order(z1, cols);
  const Index remaining = cols - m;
  const Index r = u_hat.cols();
  const Index p2_rows = remaining > 0 ? r * remaining : 0;

  Matrix s = Matrix::Zero(m * rows + p2_rows, rows * cols);
  const double a1 = std::sqrt(p1 / static_cast<double>(m * rows));
  Index row = 0;
  for (Index k = 0; k < m; ++k)
    for (Index i = 0; i < rows; ++i) s(row++, order[static_cast<std::size_t>(k)] * rows + i) = a1;

  double power = p1;
  if (p2_rows > 0) {
    const double a2 = std::sqrt(p2 / static_cast<double>(p2_rows));
    for (Index k = 0; k < remaining; ++k) {
      const Index col = order[static_cast<std::size_t>(m + k)];
      s.block(row, col * rows, r, rows) = a2 * u_hat.transpose();
      row += r;
    }
    power += p2;
  }
  return AffineMap(std::move(s), rows, cols, power);
}

}  // namespace sublr
