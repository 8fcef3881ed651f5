#include "sublr/baselines.hpp"

#include "sublr/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <sstream>

namespace sublr {

namespace {

// Power iteration underestimates the top eigenvalue by at most ~1/(2 e k) relative.
constexpr double kLipschitzMargin = 1.01;

struct Shrunk {
  Matrix value;
  double nuclear_norm = 0.0;
};

Shrunk shrink(const Matrix& m, double theta) {
  const ThinSvd svd = thin_svd(m);
  const Vector s = (svd.s.array() - theta).cwiseMax(0.0).matrix();
  return {svd.u * s.asDiagonal() * svd.v.transpose(), s.sum()};
}

bool rose(double previous, double current, double slack) {
  return current > previous + slack * std::max(1.0, std::abs(previous));
}

}  // namespace

Matrix svt(const Matrix& m, double theta) {
  require(theta >= 0.0, "svt: threshold must be >= 0");
  return shrink(m, theta).value;
}

double operator_norm_squared(const AffineMap& map, std::uint64_t seed, int iters) {
  const Matrix& s = map.stacked();
  Rng rng(seed);
  Vector v = standard_normal(s.cols(), rng);
  v.normalize();
  double estimate = 0.0;
  for (int k = 0; k < iters; ++k) {
    const Vector w = s.transpose() * (s * v);
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (k > 10 && std::abs(next - estimate) <= 1e-12 * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

double default_nnm_tau(const AffineMap& map, double sigma2) {
  require(sigma2 > 0.0, "default_nnm_tau: needs sigma^2 > 0; pass tau explicitly otherwise");
  const double mn = static_cast<double>(map.rows() * map.cols());
  const double entry_scale = std::sqrt(sigma2 * map.frobenius_squared() / mn);
  const double lambda =
      entry_scale * (std::sqrt(static_cast<double>(map.rows())) + std::sqrt(static_cast<double>(map.cols())));
  return 1.0 / (2.0 * lambda);
}

double nnm_objective(const AffineMap& map, const Vector& y, const Matrix& l, double tau) {
  return singular_values(l).sum() + tau * (y - map.apply(l)).squaredNorm();
}

SolverResult nnm_solve(const AffineMap& map, const Vector& y, const SolverOptions& options) {
  require(options.max_iters >= 1 && options.tol > 0.0, "nnm: need max_iters >= 1 and tol > 0");
  require_dims(y.size() == map.observations(), "nnm: observation length must equal p");
  require(options.tau.has_value() && *options.tau > 0.0, "nnm: tau must be set and positive");
  const double tau = *options.tau;
  const double lipschitz = 2.0 * tau * operator_norm_squared(map, options.seed) * kLipschitzMargin;
  double step = 1.0 / lipschitz;
  if (options.step) {
    require(*options.step > 0.0, "nnm: step must be positive");
    if (*options.step > step * kLipschitzMargin) {
      std::ostringstream msg;
      msg << "nnm: step " << *options.step << " exceeds 1/(2 tau ||S||^2) = " << step;
      throw DomainError(msg.str());
    }
    step = *options.step;
  }

  const Matrix& s = map.stacked();
  const Index rows = map.rows();
  const Index cols = map.cols();

  SolverResult out;
  Matrix l = Matrix::Zero(rows, cols);
  Vector residual = y;  // y - S vec(L)
  double objective = tau * residual.squaredNorm();
  out.trace.push_back(objective);

  for (int it = 1; it <= options.max_iters; ++it) {
    const Vector grad = -2.0 * tau * (s.transpose() * residual);
    const Matrix point = l - step * unvec(grad, rows, cols);
    Shrunk next = shrink(point, step);
    residual = y - s * Eigen::Map<const Vector>(next.value.data(), next.value.size());
    const double next_objective = next.nuclear_norm + tau * residual.squaredNorm();
    if (rose(objective, next_objective, options.monotone_slack)) {
      std::ostringstream msg;
      msg << "nnm: objective increased at iteration " << it << " (" << objective << " -> "
          << next_objective << "); step " << step << " is too large";
      throw NumericalError(msg.str());
    }
    const double base = l.norm();
    const double change = (next.value - l).norm();
    l = std::move(next.value);
    objective = next_objective;
    out.trace.push_back(objective);
    out.iterations = it;
    if (change <= options.tol * base || (base == 0.0 && change == 0.0)) {
      out.converged = true;
      break;
    }
  }
  out.estimate = std::move(l);
  return out;
}

namespace {

Vector solve_spd(const Matrix& k, const Vector& rhs, int iteration, const char* half) {
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "mf: singular least-squares " << half << " update at iteration " << iteration;
    throw NumericalError(msg.str());
  }
  return llt.solve(rhs);
}

using ConstMap = Eigen::Map<const Matrix>;

}  // namespace

// Both half-steps are linear least squares in one factor:
//   R step: S vec(B R^T) = S (I_N (x) B) vec(R^T)
//   B step: S vec(B R^T) = S (R (x) I_M) vec(B)
// Column-major storage turns every Kronecker product below into a plain reshape, so
// each normal matrix costs a couple of well-shaped GEMMs.
SolverResult mf_solve(const AffineMap& map, const Vector& y, const SolverOptions& options,
                      Warnings* warnings) {
  require(options.max_iters >= 1 && options.tol > 0.0, "mf: need max_iters >= 1 and tol > 0");
  require_dims(y.size() == map.observations(), "mf: observation length must equal p");
  const Index rows = map.rows();
  const Index cols = map.cols();
  const Index r = options.rank;
  require(r >= 1 && r <= std::min(rows, cols), "mf: rank must satisfy 1 <= r <= min(M, N)");
  if (warnings && map.observations() < r * (rows + cols - r))
    warnings->push_back("mf: p is below the degrees of freedom r (M + N - r)");

  const Matrix& s = map.stacked();
  const Index p = map.observations();
  const Index mn = rows * cols;

  if (y.norm() == 0.0) {
    SolverResult zero;
    zero.estimate = Matrix::Zero(rows, cols);
    zero.trace = {0.0};
    zero.converged = true;
    return zero;
  }

  // G = S^T S; G(a + M j, b + M k) couples entry (a, j) with entry (b, k).
  Matrix gram = Matrix::Zero(mn, mn);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(s.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  const Vector sty = s.transpose() * y;
  // Column j holds vec(S_j), the p x M block of S acting on column j of L.
  const ConstMap s_blocks(s.data(), p * rows, cols);

  Matrix b = thin_svd(map.adjoint(y)).u.leftCols(r);
  Matrix rt(cols, r);
  Matrix h(r, mn * cols);        // (I (x) B)^T G, viewed as (r N) x (M N)
  Matrix ht(mn, r * cols);       // its transpose, G (I (x) B)
  Matrix k_r(r * cols, r * cols);
  Matrix a_b(p * rows, r);       // S (R (x) I), viewed as p x (M r)

  SolverResult out;
  Matrix l = Matrix::Zero(rows, cols);
  double residual = y.norm();
  out.trace.push_back(residual);
  const double slack = options.monotone_slack * std::max(1.0, y.norm());

  auto check_monotone = [&](double next, int it, const char* half) {
    if (next > residual + slack) {
      std::ostringstream msg;
      msg << "mf: residual increased in the " << half << " update at iteration " << it << " ("
          << residual << " -> " << next << ")";
      throw NumericalError(msg.str());
    }
    residual = next;
  };
  auto residual_of = [&](const Matrix& est) {
    return (y - s * Eigen::Map<const Vector>(est.data(), est.size())).norm();
  };

  for (int it = 1; it <= options.max_iters; ++it) {
    // R update. Contract B against the row index of G, transpose, contract again.
    h.noalias() = b.transpose() * ConstMap(gram.data(), rows, cols * mn);
    ht = Eigen::Map<const Matrix>(h.data(), r * cols, mn).transpose();
    Eigen::Map<Matrix>(k_r.data(), r, cols * r * cols).noalias() =
        b.transpose() * ConstMap(ht.data(), rows, cols * r * cols);
    const Matrix rhs = b.transpose() * ConstMap(sty.data(), rows, cols);  // r x N
    const Vector rt_vec = solve_spd(k_r, Eigen::Map<const Vector>(rhs.data(), rhs.size()), it, "R");
    rt = ConstMap(rt_vec.data(), r, cols).transpose();
    check_monotone(residual_of(b * rt.transpose()), it, "R");

    // B update.
    a_b.noalias() = s_blocks * rt;
    const ConstMap a_bv(a_b.data(), p, rows * r);
    Matrix k_b = Matrix::Zero(rows * r, rows * r);
    k_b.selfadjointView<Eigen::Lower>().rankUpdate(a_bv.transpose());
    const Vector b_vec = solve_spd(k_b, a_bv.transpose() * y, it, "B");
    b = ConstMap(b_vec.data(), rows, r);
    Matrix next = b * rt.transpose();
    check_monotone(residual_of(next), it, "B");

    // Re-orthonormalize B; the product B R^T is unchanged.
    Eigen::HouseholderQR<Matrix> qr(b);
    const Matrix rb = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    b = qr.householderQ() * Matrix::Identity(rows, r);
    rt = rt * rb.transpose();

    const double base = l.norm();
    const double change = (next - l).norm();
    l = std::move(next);
    out.trace.push_back(residual);
    out.iterations = it;
    if (base > 0.0 ? change <= options.tol * base : change == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.estimate = std::move(l);
  return out;
}

}  // namespace sublr
