#pragma once

#include "sublr/linalg.hpp"

#include <optional>
#include <span>

namespace sublr {

/// Linear measurement operator y_i = tr(X_i^T L), stored as the stacked
/// p x (M*N) matrix whose i-th row is vec(X_i)^T.
///
/// The power budget bounds ||S||_F^2; construction rejects infeasible maps.
/// Instances are immutable once built.
class AffineMap {
 public:
  /// `power` defaults to the realized ||stacked||_F^2.
  AffineMap(Matrix stacked, Index rows, Index cols, std::optional<double> power = std::nullopt);

  static AffineMap from_measurements(std::span<const Matrix> measurement_matrices,
                                     std::optional<double> power = std::nullopt);

  Index observations() const { return stacked_.rows(); }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  double power() const { return power_; }
  const Matrix& stacked() const { return stacked_; }
  double frobenius_squared() const { return stacked_.squaredNorm(); }

  /// X_i reshaped back to M x N.
  Matrix measurement_matrix(Index i) const;

  /// S * vec(L).
  Vector apply(const Matrix& l) const;

  /// Same map evaluated as tr(X_i^T L) per measurement matrix.
  Vector apply_trace(const Matrix& l) const;

  /// unvec(S^T y).
  Matrix adjoint(const Vector& y) const;

  /// Rows of `this` followed by rows of `below`; powers add.
  AffineMap stacked_with(const AffineMap& below) const;

 private:
  Matrix stacked_;
  Index rows_;
  Index cols_;
  double power_;
};

/// Gaussian noise n ~ N(0, C) with C = s^2 I, diag(v), or a full SPD matrix.
class NoiseModel {
 public:
  enum class Kind { iid, diagonal, full };

  static NoiseModel iid(Index dim, double variance);
  static NoiseModel diagonal(Vector variances);
  static NoiseModel full(Matrix covariance);

  Kind kind() const { return kind_; }
  Index dim() const { return dim_; }
  /// Only meaningful for Kind::iid.
  double variance() const { return variance_; }
  const Vector& variances() const { return variances_; }

  Matrix covariance() const;
  Vector eigenvalues_descending() const;
  bool positive_definite() const;

  /// Draw one noise vector.
  Vector sample(Rng& rng) const;

  /// Apply the inverse Cholesky factor: returns L_c^{-1} x where C = L_c L_c^T.
  /// Requires positive_definite().
  Matrix whiten(const Matrix& x) const;

  /// Returns a copy with the covariance scaled by `factor` > 0.
  NoiseModel scaled(double factor) const;

 private:
  NoiseModel(Kind kind, Index dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  Index dim_;
  double variance_ = 0.0;
  Vector variances_;
  Matrix covariance_;
  Matrix chol_lower_;
};

/// y = A(L) + n. Deterministic given the generator state.
Vector observe(const AffineMap& map, const Matrix& l, const NoiseModel& noise, Rng& rng);

/// Entries of the stacked operator i.i.d. N(0, 1); power is the realized ||S||_F^2.
AffineMap gaussian_random(Index observations, Index rows, Index cols, Rng& rng);

struct CoherenceOptions {
  /// Sum |<s_i, s_j>| (true) or the signed inner products (false).
  bool absolute = true;
};

struct Coherence {
  double value = 0.0;
  /// All-zero columns of S, excluded from the pair sum.
  Index zero_columns = 0;
};

/// Averaged mutual coherence of the unit-normalized columns of S:
///   sum_{i != j} |<s_i, s_j>| / (M^2 N^2 - p).
Coherence averaged_mutual_coherence(const AffineMap& map, CoherenceOptions options = {});

}  // namespace sublr
