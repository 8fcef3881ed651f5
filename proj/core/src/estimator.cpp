#include "sublr/estimator.hpp"

#include "sublr/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace sublr {

GlsEstimator::GlsEstimator(const Matrix& a, const NoiseModel& noise)
    : noise_(noise), ols_(noise.kind() == NoiseModel::Kind::iid), cols_(a.cols()) {
  require_dims(a.rows() == noise.dim(), "gls: design rows must equal the noise dimension");
  require(a.cols() >= 1, "gls: design needs at least one column");
  if (a.rows() < a.cols())
    throw NumericalError("gls: p < q, the Gram matrix A^T C^{-1} A is singular");
  if (!ols_ && !noise.positive_definite())
    throw NumericalError("gls: noise covariance is not positive definite");

  qr_.compute(whiten(a));
  r_factor_ = qr_.matrixQR().topRows(cols_).triangularView<Eigen::Upper>();

  const Matrix gram = r_factor_.transpose() * r_factor_;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  diagnostics_.gram_condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(diagnostics_.gram_condition < kMaxCondition))
    throw NumericalError("gls: Gram matrix condition number " +
                         std::to_string(diagnostics_.gram_condition) + " exceeds 1e12");
  diagnostics_.ill_conditioned = diagnostics_.gram_condition >= kWarnCondition;
}

Matrix GlsEstimator::whiten(const Matrix& x) const { return ols_ ? x : noise_.whiten(x); }

Vector GlsEstimator::estimate(const Vector& y) const {
  require_dims(y.size() == noise_.dim(), "gls: observation length must equal p");
  return qr_.solve(whiten(y));
}

Matrix GlsEstimator::error_covariance() const {
  const Matrix rinv = r_factor_.triangularView<Eigen::Upper>().solve(
      Matrix::Identity(cols_, cols_));
  Matrix cov = rinv * rinv.transpose();
  if (ols_) cov *= noise_.variance();
  return cov;
}

Vector gls_estimate(const GlsProblem& problem) {
  return GlsEstimator(problem.a, problem.c).estimate(problem.y);
}

Matrix project_onto_subspace(const Matrix& l_tilde, const SubspaceBasis& f) {
  require_dims(l_tilde.rows() == f.ambient(), "project_onto_subspace: row count must equal M");
  return f.matrix() * (f.matrix().transpose() * l_tilde);
}

Matrix reconstruct(const SubspaceBasis& f, const Matrix& q_hat) {
  require_dims(q_hat.rows() == f.dim(), "reconstruct: Q rows must equal d");
  return f.matrix() * q_hat;
}

double nmse(const Matrix& l_hat, const Matrix& l) {
  require_dims(l_hat.rows() == l.rows() && l_hat.cols() == l.cols(), "nmse: shape mismatch");
  const double ref = l.squaredNorm();
  require(ref > 0.0, "nmse: reference matrix is zero");
  return (l_hat - l).squaredNorm() / ref;
}

}  // namespace sublr
