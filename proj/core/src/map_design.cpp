#include "sublr/map_design.hpp"

#include "sublr/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sublr {

SubspaceBasis::SubspaceBasis(Matrix basis) : basis_(std::move(basis)) {
  require(basis_.cols() >= 1 && basis_.cols() <= basis_.rows(),
          "SubspaceBasis: dimension d must satisfy 1 <= d <= M");
  require(orthonormality_defect(basis_) <= kOrthonormalityTolerance,
          "SubspaceBasis: basis is not semi-unitary");
}

SubspaceBasis SubspaceBasis::orthonormalize(const Matrix& spanning) {
  require(spanning.cols() >= 1 && spanning.cols() <= spanning.rows(),
          "SubspaceBasis::orthonormalize: need 1 <= d <= M columns");
  Eigen::HouseholderQR<Matrix> qr(spanning);
  Matrix q = qr.householderQ() * Matrix::Identity(spanning.rows(), spanning.cols());
  return SubspaceBasis(std::move(q));
}

Matrix restrict_to_subspace(const Matrix& stacked, const SubspaceBasis& f) {
  const Index m = f.ambient();
  const Index d = f.dim();
  require_dims(stacked.cols() % m == 0, "restrict_to_subspace: S columns must be a multiple of M");
  const Index n = stacked.cols() / m;
  Matrix a(stacked.rows(), n * d);
  for (Index j = 0; j < n; ++j) a.middleCols(j * d, d).noalias() = stacked.middleCols(j * m, m) * f.matrix();
  return a;
}

Matrix lift_design(const Matrix& a_hat, const SubspaceBasis& f) {
  const Index m = f.ambient();
  const Index d = f.dim();
  require_dims(a_hat.cols() % d == 0, "lift_design: A columns must be a multiple of d");
  const Index n = a_hat.cols() / d;
  Matrix s(a_hat.rows(), n * m);
  for (Index j = 0; j < n; ++j)
    s.middleCols(j * m, m).noalias() = a_hat.middleCols(j * d, d) * f.matrix().transpose();
  return s;
}

namespace {

/// Eigenvectors and eigenvalues of C for its `count` smallest eigenvalues, ascending.
std::pair<Matrix, Vector> smallest_eigenpairs(const NoiseModel& noise, Index count) {
  const Index p = noise.dim();
  switch (noise.kind()) {
    case NoiseModel::Kind::iid:
      return {Matrix::Identity(p, count), Vector::Constant(count, noise.variance())};
    case NoiseModel::Kind::diagonal: {
      std::vector<Index> order(static_cast<std::size_t>(p));
      std::iota(order.begin(), order.end(), Index{0});
      const Vector& v = noise.variances();
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) < v(b); });
      Matrix u = Matrix::Zero(p, count);
      Vector d(count);
      for (Index k = 0; k < count; ++k) {
        u(order[static_cast<std::size_t>(k)], k) = 1.0;
        d(k) = v(order[static_cast<std::size_t>(k)]);
      }
      return {u, d};
    }
    case NoiseModel::Kind::full: {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(noise.covariance());
      if (eig.info() != Eigen::Success) throw NumericalError("design: eigendecomposition failed");
      return {eig.eigenvectors().leftCols(count), eig.eigenvalues().head(count)};
    }
  }
  return {};
}

}  // namespace

DesignResult solve_power_constrained_design(const NoiseModel& noise, Index n_cols, double power,
                                            const std::optional<Matrix>& rotation) {
  const Index p = noise.dim();
  require(n_cols >= 1, "design: need at least one unknown");
  require(p >= n_cols, "design: p = " + std::to_string(p) + " < N*d = " + std::to_string(n_cols) +
                           " makes the GLS Gram matrix singular");
  require(power > 0.0, "design: power must be positive");
  if (!noise.positive_definite()) throw NumericalError("design: noise covariance is not SPD");

  auto [u_a, d] = smallest_eigenpairs(noise, n_cols);
  if ((d.array() <= 0.0).any()) throw NumericalError("design: noise covariance is not SPD");

  const Vector sqrt_d = d.cwiseSqrt();
  const double trace_sqrt = sqrt_d.sum();

  DesignResult out;
  out.mu = trace_sqrt * trace_sqrt / (power * power);
  // Sigma_A^2 = mu^{-1/2} D^{1/2}
  const Vector sigma_a = (sqrt_d / std::sqrt(out.mu)).cwiseSqrt();

  Matrix v_a = Matrix::Identity(n_cols, n_cols);
  if (rotation) {
    require_dims(rotation->rows() == n_cols && rotation->cols() == n_cols,
                 "design: rotation must be N*d x N*d");
    require(orthonormality_defect(*rotation) <= 1e-8, "design: rotation must be orthonormal");
    v_a = *rotation;
  }
  out.a_hat = u_a * sigma_a.asDiagonal() * v_a.transpose();
  out.theoretical_mse = trace_sqrt * trace_sqrt / power;
  return out;
}

double design_objective(const Matrix& a, const NoiseModel& noise) {
  require_dims(a.rows() == noise.dim(), "design_objective: row count must equal the noise dim");
  const Matrix wa = noise.whiten(a);
  const Matrix gram = wa.transpose() * wa;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("design_objective: singular Gram matrix");
  return llt.solve(Matrix::Identity(gram.rows(), gram.cols())).trace();
}

double kkt_residual(const DesignResult& design, const NoiseModel& noise) {
  const Matrix& a = design.a_hat;
  const Matrix ata = a.transpose() * a;
  const Matrix wa = noise.whiten(a);
  const Matrix gram = wa.transpose() * wa;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("kkt_residual: singular Gram matrix");
  const Matrix inv = llt.solve(Matrix::Identity(gram.rows(), gram.cols()));
  return (ata - inv / design.mu).norm() / ata.norm();
}

namespace {

void check_spectrum(const Vector& singular_values) {
  for (Index k = 0; k < singular_values.size(); ++k) {
    require(singular_values(k) >= 0.0, "mse_profile: singular values must be nonnegative");
    if (k > 0)
      require(singular_values(k) <= singular_values(k - 1),
              "mse_profile: singular values must be sorted descending");
  }
}

}  // namespace

Vector mse_profile(const Vector& singular_values, const NoiseSummary& noise, Index cols,
                   double power, Index observations) {
  check_spectrum(singular_values);
  require(power > 0.0, "mse_profile: power must be positive");
  require(cols >= 1, "mse_profile: N must be >= 1");
  const Index r = singular_values.size();

  Vector tail(r + 1);
  tail(r) = 0.0;
  for (Index d = r - 1; d >= 0; --d) tail(d) = tail(d + 1) + singular_values(d) * singular_values(d);

  Vector profile(r + 1);
  profile(0) = tail(0);
  for (Index d = 1; d <= r; ++d) {
    double estimation = 0.0;
    if (const auto* iid = std::get_if<IidNoise>(&noise)) {
      require(iid->sigma2 >= 0.0, "mse_profile: sigma^2 must be >= 0");
      const double nd = static_cast<double>(cols * d);
      estimation = nd * nd * iid->sigma2 / power;
    } else {
      const auto& spectra = std::get<EffectiveSpectra>(noise).per_rank;
      require(static_cast<Index>(spectra.size()) > d,
              "mse_profile: effective spectrum missing for d = " + std::to_string(d));
      const Vector& lam = spectra[static_cast<std::size_t>(d)];
      require_dims(lam.size() == observations, "mse_profile: spectrum length must equal p");
      const Index n_cols = cols * d;
      require(observations >= n_cols, "mse_profile: p < N*d");
      const double s = lam.tail(n_cols).cwiseMax(0.0).cwiseSqrt().sum();
      estimation = s * s / power;
    }
    profile(d) = estimation + tail(d);
  }
  return profile;
}

Index optimal_rank(const Vector& singular_values, const NoiseSummary& noise, Index cols,
                   double power, Index observations) {
  const Vector profile = mse_profile(singular_values, noise, cols, power, observations);
  Index best = 0;
  for (Index d = 1; d < profile.size(); ++d)
    if (profile(d) < profile(best)) best = d;
  return best;
}

SubspaceBasis optimal_subspace(const Matrix& l, Index d, Warnings* warnings) {
  require(d >= 1, "optimal_subspace: d must be >= 1");
  const ThinSvd svd = thin_svd(l);
  const Index rank = numerical_rank(svd.s);
  require(rank >= 1, "optimal_subspace: matrix is numerically zero");
  if (d > rank) {
    if (warnings)
      warnings->push_back("optimal_subspace: d = " + std::to_string(d) +
                          " exceeds numerical rank " + std::to_string(rank) + "; truncated");
    d = rank;
  }
  return SubspaceBasis(svd.u.leftCols(d));
}

}  // namespace sublr
