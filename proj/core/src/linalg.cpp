#include "sublr/linalg.hpp"

#include "sublr/errors.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace sublr {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = dist(rng);
  return out;
}

Vector standard_normal(Index size, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector out(size);
  for (Index i = 0; i < size; ++i) out(i) = dist(rng);
  return out;
}

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unvec(const Vector& v, Index rows, Index cols) {
  require_dims(v.size() == rows * cols, "unvec: vector length does not match shape");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

ThinSvd thin_svd(const Matrix& a) {
  ThinSvd out;
  if (a.size() == 0) {
    out.u = Matrix(a.rows(), 0);
    out.v = Matrix(a.cols(), 0);
    return out;
  }
  Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.u = svd.matrixU();
  out.s = svd.singularValues();
  out.v = svd.matrixV();
  for (Index k = 0; k < out.u.cols(); ++k) {
    Index pivot = 0;
    out.u.col(k).cwiseAbs().maxCoeff(&pivot);
    if (out.u(pivot, k) < 0.0) {
      out.u.col(k) *= -1.0;
      out.v.col(k) *= -1.0;
    }
  }
  return out;
}

Vector singular_values(const Matrix& a) {
  if (a.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> svd(a);
  return svd.singularValues();
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a)(0);
}

Index numerical_rank(const Vector& s, double rel_tol) {
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  const double cut = rel_tol * s(0);
  Index rank = 0;
  while (rank < s.size() && s(rank) > cut) ++rank;
  return rank;
}

double orthonormality_defect(const Matrix& q) {
  if (q.cols() == 0) return 0.0;
  return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

}  // namespace sublr
