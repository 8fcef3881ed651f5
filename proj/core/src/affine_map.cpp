#include "sublr/affine_map.hpp"

#include "sublr/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>

namespace sublr {

namespace {

constexpr double kPowerSlack = 1e-9;
constexpr double kSymmetryTolerance = 1e-10;

}  // namespace

AffineMap::AffineMap(Matrix stacked, Index rows, Index cols, std::optional<double> power)
    : stacked_(std::move(stacked)), rows_(rows), cols_(cols) {
  require(rows_ >= 1 && cols_ >= 1, "AffineMap: matrix shape must be at least 1 x 1");
  require_dims(stacked_.cols() == rows_ * cols_,
               "AffineMap: stacked operator must have M*N columns");
  const double realized = stacked_.squaredNorm();
  power_ = power.value_or(realized);
  require(power_ >= 0.0, "AffineMap: power must be nonnegative");
  if (realized > power_ + kPowerSlack * std::max(1.0, power_))
    throw DomainError("AffineMap: ||S||_F^2 = " + std::to_string(realized) +
                      " exceeds the power budget " + std::to_string(power_));
}

AffineMap AffineMap::from_measurements(std::span<const Matrix> measurement_matrices,
                                       std::optional<double> power) {
  require(!measurement_matrices.empty(), "AffineMap: need at least one measurement matrix");
  const Index rows = measurement_matrices.front().rows();
  const Index cols = measurement_matrices.front().cols();
  Matrix stacked(static_cast<Index>(measurement_matrices.size()), rows * cols);
  for (std::size_t i = 0; i < measurement_matrices.size(); ++i) {
    const Matrix& x = measurement_matrices[i];
    require_dims(x.rows() == rows && x.cols() == cols,
                 "AffineMap: measurement matrices must share one shape");
    stacked.row(static_cast<Index>(i)) = vec(x).transpose();
  }
  return AffineMap(std::move(stacked), rows, cols, power);
}

Matrix AffineMap::measurement_matrix(Index i) const {
  require_dims(i >= 0 && i < observations(), "AffineMap: measurement index out of range");
  return unvec(stacked_.row(i).transpose(), rows_, cols_);
}

Vector AffineMap::apply(const Matrix& l) const {
  require_dims(l.rows() == rows_ && l.cols() == cols_, "AffineMap::apply: shape mismatch");
  return stacked_ * Eigen::Map<const Vector>(l.data(), l.size());
}

Vector AffineMap::apply_trace(const Matrix& l) const {
  require_dims(l.rows() == rows_ && l.cols() == cols_, "AffineMap::apply_trace: shape mismatch");
  Vector y(observations());
  for (Index i = 0; i < observations(); ++i) y(i) = (measurement_matrix(i).transpose() * l).trace();
  return y;
}

Matrix AffineMap::adjoint(const Vector& y) const {
  require_dims(y.size() == observations(), "AffineMap::adjoint: length mismatch");
  return unvec(stacked_.transpose() * y, rows_, cols_);
}

AffineMap AffineMap::stacked_with(const AffineMap& below) const {
  require_dims(below.rows_ == rows_ && below.cols_ == cols_,
               "AffineMap::stacked_with: shape mismatch");
  Matrix s(observations() + below.observations(), stacked_.cols());
  s << stacked_, below.stacked_;
  return AffineMap(std::move(s), rows_, cols_, power_ + below.power_);
}

// --- NoiseModel ------------------------------------------------------------

NoiseModel NoiseModel::iid(Index dim, double variance) {
  require(dim >= 0, "NoiseModel: negative dimension");
  require(variance >= 0.0 && std::isfinite(variance), "NoiseModel: variance must be >= 0");
  NoiseModel n(Kind::iid, dim);
  n.variance_ = variance;
  return n;
}

NoiseModel NoiseModel::diagonal(Vector variances) {
  require((variances.array() >= 0.0).all() && variances.allFinite(),
          "NoiseModel: diagonal variances must be >= 0");
  NoiseModel n(Kind::diagonal, variances.size());
  n.variances_ = std::move(variances);
  return n;
}

NoiseModel NoiseModel::full(Matrix covariance) {
  require_dims(covariance.rows() == covariance.cols(), "NoiseModel: covariance must be square");
  if (covariance.size() > 0 &&
      (covariance - covariance.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance)
    throw DomainError("NoiseModel: covariance is not symmetric");
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success)
    throw NumericalError("NoiseModel: covariance is not positive definite");
  const Vector diag = Matrix(llt.matrixL()).diagonal();
  if ((diag.array() <= 0.0).any())
    throw NumericalError("NoiseModel: covariance is not positive definite");
  NoiseModel n(Kind::full, covariance.rows());
  n.covariance_ = std::move(covariance);
  n.chol_lower_ = llt.matrixL();
  return n;
}

Matrix NoiseModel::covariance() const {
  switch (kind_) {
    case Kind::iid:
      return variance_ * Matrix::Identity(dim_, dim_);
    case Kind::diagonal:
      return variances_.asDiagonal();
    case Kind::full:
      return covariance_;
  }
  return {};
}

Vector NoiseModel::eigenvalues_descending() const {
  switch (kind_) {
    case Kind::iid:
      return Vector::Constant(dim_, variance_);
    case Kind::diagonal: {
      Vector v = variances_;
      std::sort(v.data(), v.data() + v.size(), std::greater<>());
      return v;
    }
    case Kind::full: {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_, Eigen::EigenvaluesOnly);
      return eig.eigenvalues().reverse();
    }
  }
  return {};
}

bool NoiseModel::positive_definite() const {
  switch (kind_) {
    case Kind::iid:
      return variance_ > 0.0;
    case Kind::diagonal:
      return (variances_.array() > 0.0).all();
    case Kind::full:
      return true;
  }
  return false;
}

Vector NoiseModel::sample(Rng& rng) const {
  const Vector z = standard_normal(dim_, rng);
  switch (kind_) {
    case Kind::iid:
      return std::sqrt(variance_) * z;
    case Kind::diagonal:
      return variances_.cwiseSqrt().cwiseProduct(z);
    case Kind::full:
      return chol_lower_ * z;
  }
  return z;
}

Matrix NoiseModel::whiten(const Matrix& x) const {
  require_dims(x.rows() == dim_, "NoiseModel::whiten: row count must equal the noise dimension");
  if (!positive_definite())
    throw NumericalError("NoiseModel::whiten: covariance is singular");
  switch (kind_) {
    case Kind::iid:
      return x / std::sqrt(variance_);
    case Kind::diagonal:
      return variances_.cwiseSqrt().cwiseInverse().asDiagonal() * x;
    case Kind::full:
      return chol_lower_.triangularView<Eigen::Lower>().solve(x);
  }
  return x;
}

NoiseModel NoiseModel::scaled(double factor) const {
  require(factor > 0.0, "NoiseModel::scaled: factor must be positive");
  switch (kind_) {
    case Kind::iid:
      return iid(dim_, variance_ * factor);
    case Kind::diagonal:
      return diagonal(variances_ * factor);
    case Kind::full:
      return full(covariance_ * factor);
  }
  return *this;
}

// --- free functions ----------------------------------------------------------

Vector observe(const AffineMap& map, const Matrix& l, const NoiseModel& noise, Rng& rng) {
  require_dims(noise.dim() == map.observations(), "observe: noise dimension must equal p");
  Vector y = map.apply(l);
  if (noise.kind() == NoiseModel::Kind::iid && noise.variance() == 0.0) return y;
  return y + noise.sample(rng);
}

AffineMap gaussian_random(Index observations, Index rows, Index cols, Rng& rng) {
  require(observations >= 1, "gaussian_random: p must be >= 1");
  return AffineMap(standard_normal(observations, rows * cols, rng), rows, cols);
}

Coherence averaged_mutual_coherence(const AffineMap& map, CoherenceOptions options) {
  const Matrix& s = map.stacked();
  const Vector norms = s.colwise().norm().transpose();

  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(norms.size()));
  for (Index j = 0; j < norms.size(); ++j)
    if (norms(j) > 0.0) keep.push_back(j);
  if (keep.empty()) throw DomainError("averaged_mutual_coherence: all-zero operator");

  Matrix normalized(s.rows(), static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    normalized.col(static_cast<Index>(k)) = s.col(keep[k]) / norms(keep[k]);

  Matrix gram = Matrix::Zero(normalized.cols(), normalized.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(normalized.transpose());

  double sum = 0.0;
  for (Index j = 0; j < gram.cols(); ++j)
    for (Index i = j + 1; i < gram.rows(); ++i)
      sum += options.absolute ? std::abs(gram(i, j)) : gram(i, j);
  sum *= 2.0;  // ordered pairs

  const double mn = static_cast<double>(map.rows() * map.cols());
  const double denom = mn * mn - static_cast<double>(map.observations());
  require(denom > 0.0, "averaged_mutual_coherence: M^2 N^2 - p must be positive");

  Coherence out;
  out.value = sum / denom;
  out.zero_columns = norms.size() - static_cast<Index>(keep.size());
  return out;
}

}  // namespace sublr
