#pragma once

#include "sublr/affine_map.hpp"
#include "sublr/linalg.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace sublr {

/// Semi-unitary M x d basis F of a column subspace (F^T F = I_d).
class SubspaceBasis {
 public:
  static constexpr double kOrthonormalityTolerance = 1e-8;

  /// Throws DomainError unless 1 <= d <= M and F^T F = I to 1e-8.
  explicit SubspaceBasis(Matrix basis);

  /// Orthonormalizes an arbitrary full-column-rank matrix (thin QR).
  static SubspaceBasis orthonormalize(const Matrix& spanning);

  const Matrix& matrix() const { return basis_; }
  Index dim() const { return basis_.cols(); }
  Index ambient() const { return basis_.rows(); }

 private:
  Matrix basis_;
};

/// Closed-form power-constrained MSE-optimal design of A = S (I_N (x) F).
struct DesignResult {
  Matrix a_hat;           // p x n_cols
  Matrix s_hat;           // p x (M*N), empty until lifted
  double mu = 0.0;        // KKT multiplier
  double theoretical_mse = 0.0;
};

/// A = S (I_N (x) F), evaluated block by block: A[:, j*d:(j+1)*d] = S[:, j*M:(j+1)*M] F.
Matrix restrict_to_subspace(const Matrix& stacked, const SubspaceBasis& f);

/// Minimizes tr((A^T C^{-1} A)^{-1}) subject to ||A||_F^2 <= power.
///
/// U_A collects the eigenvectors of C for its n_cols smallest eigenvalues D,
/// mu = tr(D^{1/2})^2 / P^2, Sigma_A^2 = mu^{-1/2} D^{1/2} and V_A = `rotation`
/// (identity when omitted). The minimum is (1/P) (sum of the n_cols smallest
/// sqrt(eigenvalues))^2.
DesignResult solve_power_constrained_design(const NoiseModel& noise, Index n_cols, double power,
                                            const std::optional<Matrix>& rotation = std::nullopt);

/// S = A (I_N (x) F)^T. Right-multiplication by a semi-unitary factor keeps ||.||_F.
Matrix lift_design(const Matrix& a_hat, const SubspaceBasis& f);

/// Objective tr((A^T C^{-1} A)^{-1}) evaluated directly.
double design_objective(const Matrix& a, const NoiseModel& noise);

/// ||A^T A - (1/mu) (A^T C^{-1} A)^{-1}||_F / ||A^T A||_F.
double kkt_residual(const DesignResult& design, const NoiseModel& noise);

/// Noise input for the rank-selection MSE.
///
/// `IidNoise` uses d^2 N^2 sigma^2 / P for the estimation term. `EffectiveSpectra`
/// supplies, for every d = 1..r, the descending eigenvalues of the effective
/// covariance seen by the rank-d estimator (index 0 is ignored).
struct IidNoise {
  double sigma2 = 0.0;
};
struct EffectiveSpectra {
  std::vector<Vector> per_rank;
};
using NoiseSummary = std::variant<IidNoise, EffectiveSpectra>;

/// MSE(d) for d = 0..r: estimation term plus the discarded energy sum_{k>d} lambda_k^2.
Vector mse_profile(const Vector& singular_values, const NoiseSummary& noise, Index cols,
                   double power, Index observations);

/// argmin_d MSE(d); ties go to the smaller d.
Index optimal_rank(const Vector& singular_values, const NoiseSummary& noise, Index cols,
                   double power, Index observations);

/// Top-d left singular vectors of L. When d exceeds the numerical rank the basis
/// is truncated and a warning is appended.
SubspaceBasis optimal_subspace(const Matrix& l, Index d, Warnings* warnings = nullptr);

}  // namespace sublr
