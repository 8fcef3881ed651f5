#pragma once

#include "sublr/affine_map.hpp"
#include "sublr/linalg.hpp"
#include "sublr/map_design.hpp"

#include <Eigen/QR>

namespace sublr {

struct GlsDiagnostics {
  double gram_condition = 1.0;
  bool ill_conditioned = false;  // condition in [1e8, 1e12)
};

/// Generalized least squares x = (A^T C^{-1} A)^{-1} A^T C^{-1} y.
///
/// C^{-1} is never formed: A and y are whitened with the Cholesky factor of C and
/// the whitened system is solved by Householder QR. The factorization is kept so
/// one estimator can be applied to many observation vectors.
///
/// For i.i.d. noise the estimate does not depend on the variance, so a zero
/// variance is accepted and reduces to ordinary least squares.
class GlsEstimator {
 public:
  static constexpr double kWarnCondition = 1e8;
  static constexpr double kMaxCondition = 1e12;

  GlsEstimator(const Matrix& a, const NoiseModel& noise);

  Vector estimate(const Vector& y) const;

  /// (A^T C^{-1} A)^{-1}; its trace is the estimator MSE.
  Matrix error_covariance() const;
  double mse() const { return error_covariance().trace(); }

  const GlsDiagnostics& diagnostics() const { return diagnostics_; }
  Index parameters() const { return cols_; }

 private:
  Matrix whiten(const Matrix& x) const;

  NoiseModel noise_;
  bool ols_ = false;  // iid noise: whitening is a scalar and drops out
  Index cols_;
  Eigen::HouseholderQR<Matrix> qr_;
  Matrix r_factor_;
  GlsDiagnostics diagnostics_;
};

struct GlsProblem {
  Matrix a;
  NoiseModel c;
  Vector y;
};

Vector gls_estimate(const GlsProblem& problem);

/// F F^T L~.
Matrix project_onto_subspace(const Matrix& l_tilde, const SubspaceBasis& f);

/// L^ = F Q^.
Matrix reconstruct(const SubspaceBasis& f, const Matrix& q_hat);

/// ||L^ - L||_F^2 / ||L||_F^2.
double nmse(const Matrix& l_hat, const Matrix& l);

}  // namespace sublr
