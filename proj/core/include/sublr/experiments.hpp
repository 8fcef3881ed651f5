#pragma once

#include "sublr/config.hpp"
#include "sublr/linalg.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace sublr {

/// Headered table written as CSV. Cells are preformatted strings.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  void write_csv(std::ostream& out) const;
  /// Column index by name; throws std::out_of_range if absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Fixed, locale-independent formatting so reruns are byte-identical.
std::string format_number(double value);

/// L = G1 G2^T with G1 (M x r), G2 (N x r) i.i.d. N(0, 1).
Matrix generate_low_rank(Index rows, Index cols, Index rank, Rng& rng);

/// Mean and standard error (sample std / sqrt(n)).
struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};
MeanStderr mean_stderr(const std::vector<double>& samples);

/// Runs body(trial) for trial = 0..count-1 on `threads` workers. Each trial owns its
/// output slot, so results do not depend on scheduling.
void parallel_for_trials(int count, unsigned threads, const std::function<void(int)>& body);

/// Which random stream a trial uses; every figure point gets its own family.
std::uint64_t trial_stream(std::uint64_t point, std::uint64_t trial);

// Figures. Each returns the CSV table; every row carries the master seed and trials.

/// Theoretical vs Monte-Carlo optimal estimate rank over the noise grid.
Table fig_optimal_d(const ExperimentConfig& config);

/// Two-step NMSE versus noise for each stage-one column count.
Table fig_two_step_observations(const ExperimentConfig& config);

/// Averaged mutual coherence of the two-step operator vs a Gaussian map of equal p.
Table fig_coherence(const ExperimentConfig& config);

/// Two-step vs NNM vs MF on the (p, sigma^2) grid.
Table fig_benchmark(const ExperimentConfig& config);

/// Two-step NMSE with the true rank vs the estimated rank.
Table fig_rank_mode(const ExperimentConfig& config);

/// Stage-one column count that yields p observations: (p - r N) / (M - r).
/// Throws ConfigError when p is not reachable with an integer m in [r, N].
Index columns_for_observations(Index p, Index rows, Index cols, Index rank);

}  // namespace sublr
