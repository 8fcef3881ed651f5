#pragma once

#include "sublr/linalg.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sublr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RankMode { known, estimated, both };

/// Everything an experiment needs. Defaults reproduce the M=20, N=50, r=6 setting
/// with P1 = P2 = M N and 1000 trials.
struct ExperimentConfig {
  Index M = 20;
  Index N = 50;
  Index r = 6;
  Index m = 9;                       // stage-one columns, ceil(1.5 r) by default
  std::vector<Index> m_grid;         // empty: {r, 1.5r, 2r, 2.5r} rounded up
  std::vector<double> sigma2_grid{0.001, 0.01, 0.1, 1.0};
  std::vector<Index> p_grid{384, 426, 468};
  double P1 = 1000.0;
  double P2 = 1000.0;
  double design_power = 1000.0;      // single-stage known-subspace experiments
  int trials = 1000;
  std::uint64_t seed = 20240101;
  std::vector<std::string> methods{"two_step", "nnm", "mf", "gaussian_map_reference"};
  RankMode rank_mode = RankMode::both;
  unsigned threads = 0;              // 0: hardware concurrency
  int solver_max_iters = 1000;
  double solver_tol = 1e-6;
  std::string out_dir = "bench_out";

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  std::vector<Index> resolved_m_grid() const;
  bool has_method(const std::string& name) const;

  /// One `key = value` line per field, in a fixed order.
  std::string manifest() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are errors.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies key/value pairs on top of `config`. Keys match the manifest names.
void apply_overrides(ExperimentConfig& config, const std::map<std::string, std::string>& values);

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});

std::vector<double> parse_double_list(const std::string& text);
std::vector<Index> parse_index_list(const std::string& text);

}  // namespace sublr
