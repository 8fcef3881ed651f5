#pragma once

#include "sublr/affine_map.hpp"
#include "sublr/linalg.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace sublr {

struct SolverOptions {
  int max_iters = 1000;
  double tol = 1e-6;                 // relative Frobenius change of the iterate
  std::optional<double> tau;         // weight on the data-fit term of NNM
  std::optional<double> step;        // proximal step; auto from a Lipschitz estimate
  Index rank = 1;                    // MF target rank
  std::uint64_t seed = 0;            // power-iteration start
  double monotone_slack = 1e-9;      // relative slack on objective increases
};

struct SolverResult {
  Matrix estimate;
  std::vector<double> trace;  // objective (NNM) or residual norm (MF) per iteration
  int iterations = 0;
  bool converged = false;
};

/// Singular value soft-thresholding, the proximal operator of theta ||.||_*.
Matrix svt(const Matrix& m, double theta);

/// Largest eigenvalue of S^T S by power iteration.
double operator_norm_squared(const AffineMap& map, std::uint64_t seed = 0, int iters = 200);

/// tau = 1 / (2 lambda) with lambda = sigma sqrt(||S||_F^2 / (M N)) (sqrt M + sqrt N),
/// the spectral norm of the adjoint noise image. Conventional form:
/// min (1/2)||y - A(L)||^2 + lambda ||L||_*.
double default_nnm_tau(const AffineMap& map, double sigma2);

/// ||L||_* + tau ||y - A(L)||_2^2.
double nnm_objective(const AffineMap& map, const Vector& y, const Matrix& l, double tau);

/// Proximal gradient on ||L||_* + tau ||y - A(L)||^2 starting from zero.
/// Throws NumericalError if the objective rises beyond the slack.
SolverResult nnm_solve(const AffineMap& map, const Vector& y, const SolverOptions& options);

/// Alternating least squares on ||y - A(B R^T)||^2 with spectral initialization.
/// `trace` holds ||y - A(B R^T)|| after every full sweep.
SolverResult mf_solve(const AffineMap& map, const Vector& y, const SolverOptions& options,
                      Warnings* warnings = nullptr);

}  // namespace sublr
