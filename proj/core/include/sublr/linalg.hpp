#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sublr {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Non-fatal conditions collected by operations that can degrade gracefully.
using Warnings = std::vector<std::string>;

/// All randomness flows through a 64-bit Mersenne twister seeded explicitly.
using Rng = std::mt19937_64;

/// splitmix64 finalizer; maps (master seed, stream index) to an independent seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  return Rng(derive_seed(master, stream));
}

Matrix standard_normal(Index rows, Index cols, Rng& rng);
Vector standard_normal(Index size, Rng& rng);

/// Column-major vectorization, matching vec(X) in the measurement model.
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, Index rows, Index cols);

struct ThinSvd {
  Matrix u;  // rows x k, left singular vectors
  Vector s;  // k singular values, descending
  Matrix v;  // cols x k
};

/// Thin SVD with a deterministic sign convention: every left singular vector is
/// flipped so that its largest-magnitude entry is positive (v follows along).
ThinSvd thin_svd(const Matrix& a);

Vector singular_values(const Matrix& a);
double spectral_norm(const Matrix& a);

/// Number of singular values above rel_tol * s[0].
Index numerical_rank(const Vector& s, double rel_tol = 1e-9);

/// ||Q^T Q - I||_max.
double orthonormality_defect(const Matrix& q);

}  // namespace sublr
