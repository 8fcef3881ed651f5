#include "sublr/experiments.hpp"

#include "sublr/baselines.hpp"
#include "sublr/errors.hpp"
#include "sublr/estimator.hpp"
#include "sublr/map_design.hpp"
#include "sublr/two_step.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace sublr {

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw std::invalid_argument("Table: row width does not match header");
  rows.push_back(std::move(row));
}

void Table::write_csv(std::ostream& out) const {
  auto write_line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      const std::string& cell = cells[i];
      if (cell.find_first_of(",\"\n") == std::string::npos) {
        out << cell;
        continue;
      }
      out << '"';
      for (char ch : cell) {
        if (ch == '"') out << '"';
        out << ch;
      }
      out << '"';
    }
    out << '\n';
  };
  write_line(columns);
  for (const auto& row : rows) write_line(row);
}

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("Table: no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double Table::number(std::size_t row, const std::string& name) const {
  const std::string& cell = rows.at(row).at(column(name));
  if (cell.empty() || cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw std::invalid_argument("Table: cell '" + cell + "' is not a number");
  return v;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 10);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, ptr);
}

namespace {

std::string format_count(long long value) { return std::to_string(value); }

}  // namespace

Matrix generate_low_rank(Index rows, Index cols, Index rank, Rng& rng) {
  require(rank >= 1 && rank <= std::min(rows, cols), "generate_low_rank: need 1 <= r <= min(M, N)");
  const Matrix g1 = standard_normal(rows, rank, rng);
  const Matrix g2 = standard_normal(cols, rank, rng);
  return g1 * g2.transpose();
}

MeanStderr mean_stderr(const std::vector<double>& samples) {
  MeanStderr out;
  if (samples.empty()) return out;
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double v : samples) sum += v;
  out.mean = sum / n;
  if (samples.size() < 2) return out;
  double ss = 0.0;
  for (double v : samples) ss += (v - out.mean) * (v - out.mean);
  out.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

void parallel_for_trials(int count, unsigned threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(count));
  if (workers == 1) {
    for (int t = 0; t < count; ++t) body(t);
    return;
  }

  std::mutex mutex;
  std::exception_ptr failure;
  int next = 0;
  auto worker = [&] {
    for (;;) {
      int t = 0;
      {
        std::lock_guard<std::mutex> lock(mutex);
        if (next >= count || failure) return;
        t = next++;
      }
      try {
        body(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t trial_stream(std::uint64_t point, std::uint64_t trial) {
  return (point << 32) ^ trial;
}

Index columns_for_observations(Index p, Index rows, Index cols, Index rank) {
  if (rows <= rank)
    throw ConfigError("columns_for_observations: M must exceed r");
  const Index extra = p - rank * cols;
  if (extra < 0 || extra % (rows - rank) != 0)
    throw ConfigError("p = " + std::to_string(p) + " is not of the form m M + r (N - m)");
  const Index m = extra / (rows - rank);
  if (m < rank || m > cols)
    throw ConfigError("p = " + std::to_string(p) + " needs m = " + std::to_string(m) +
                      " outside [r, N]");
  return m;
}

namespace {

// Stream 0 of each trial draws the ground-truth matrix, shared by all grid points and
// methods so comparisons are paired.
constexpr std::uint64_t kTruthStream = 0;

Matrix trial_truth(const ExperimentConfig& c, int trial) {
  Rng rng = make_rng(c.seed, trial_stream(kTruthStream, static_cast<std::uint64_t>(trial)));
  return generate_low_rank(c.M, c.N, c.r, rng);
}

std::vector<Matrix> all_truths(const ExperimentConfig& c) {
  std::vector<Matrix> out(static_cast<std::size_t>(c.trials));
  parallel_for_trials(c.trials, c.threads, [&](int t) { out[static_cast<std::size_t>(t)] = trial_truth(c, t); });
  return out;
}

struct TwoStepStats {
  std::vector<double> nmse;
  long long violations = 0;
  long long undefined = 0;
  long long rank_matches = 0;
};

bool violates(const TwoStepResult& res) {
  constexpr double rel = 1e-9;
  const bool wedin = res.subspace_distance > res.wedin_bound * (1.0 + rel) + 1e-12;
  const bool total = res.realized_error > res.total_bound * (1.0 + rel) + 1e-12;
  return wedin || total;
}

TwoStepStats run_two_step_trials(const ExperimentConfig& c, const std::vector<Matrix>& truths,
                                 Index m, double sigma2, bool known_rank, std::uint64_t point) {
  const auto n = static_cast<std::size_t>(c.trials);
  std::vector<double> nmse(n);
  std::vector<int> violation(n, 0), undefined(n, 0), match(n, 0);
  parallel_for_trials(c.trials, c.threads, [&](int t) {
    const auto i = static_cast<std::size_t>(t);
    TwoStepConfig tc;
    tc.m = m;
    tc.p1 = c.P1;
    tc.p2 = c.P2;
    tc.sigma2 = sigma2;
    if (known_rank) tc.rank = c.r;
    tc.oracle_rank = c.r;
    Rng rng = make_rng(c.seed, trial_stream(point, static_cast<std::uint64_t>(t)));
    const TwoStepResult res = run_two_step(tc, truths[i], rng);
    nmse[i] = sublr::nmse(res.l_hat, truths[i]);
    match[i] = res.r_hat == c.r;
    if (res.r_hat == c.r) {
      if (std::isnan(res.wedin_bound) || std::isnan(res.total_bound)) undefined[i] = 1;
      else violation[i] = violates(res);
    }
  });
  TwoStepStats out;
  out.nmse = std::move(nmse);
  for (std::size_t i = 0; i < n; ++i) {
    out.violations += violation[i];
    out.undefined += undefined[i];
    out.rank_matches += match[i];
  }
  return out;
}

}  // namespace

Table fig_optimal_d(const ExperimentConfig& c) {
  c.validate();
  Table table;
  table.columns = {"sigma2", "d_theory", "d_empirical", "nmse_theory", "nmse_at_d_theory",
                   "nmse_at_d_empirical", "seed", "trials"};

  Rng truth_rng = make_rng(c.seed, trial_stream(kTruthStream, 0));
  const Matrix l = generate_low_rank(c.M, c.N, c.r, truth_rng);
  const ThinSvd svd = thin_svd(l);
  const Vector lambda = svd.s.head(c.r);
  const double energy = l.squaredNorm();
  const auto trials = static_cast<std::size_t>(c.trials);

  for (std::size_t g = 0; g < c.sigma2_grid.size(); ++g) {
    const double sigma2 = c.sigma2_grid[g];
    const Vector profile = mse_profile(lambda, IidNoise{sigma2}, c.N, c.design_power, c.N * c.r);
    const Index d_theory = optimal_rank(lambda, IidNoise{sigma2}, c.N, c.design_power, c.N * c.r);

    // One design per d; the i.i.d. design does not depend on the noise level, so a
    // unit-variance model stands in when sigma^2 = 0.
    struct Plan {
      SubspaceBasis f;
      Vector y_clean;
      GlsEstimator gls;
    };
    std::vector<Plan> plans;
    for (Index d = 1; d <= c.r; ++d) {
      SubspaceBasis f(svd.u.leftCols(d));
      const Index n_cols = c.N * d;
      const double design_var = sigma2 > 0.0 ? sigma2 : 1.0;
      const DesignResult design =
          solve_power_constrained_design(NoiseModel::iid(n_cols, design_var), n_cols, c.design_power);
      const AffineMap map(lift_design(design.a_hat, f), c.M, c.N, c.design_power);
      Vector y_clean = map.apply(l);
      GlsEstimator gls(restrict_to_subspace(map.stacked(), f), NoiseModel::iid(n_cols, sigma2));
      plans.push_back(Plan{std::move(f), std::move(y_clean), std::move(gls)});
    }

    // err[t][d], d = 0 is the zero estimate. Noise is shared across d within a trial.
    std::vector<std::vector<double>> err(trials, std::vector<double>(static_cast<std::size_t>(c.r) + 1, 1.0));
    parallel_for_trials(c.trials, c.threads, [&](int t) {
      Rng rng = make_rng(c.seed, trial_stream(1 + g, static_cast<std::uint64_t>(t)));
      const Vector noise = std::sqrt(sigma2) * standard_normal(c.N * c.r, rng);
      for (Index d = 1; d <= c.r; ++d) {
        const Plan& plan = plans[static_cast<std::size_t>(d - 1)];
        const Index p = plan.y_clean.size();
        const Vector q = plan.gls.estimate(plan.y_clean + noise.head(p));
        const Matrix l_hat = reconstruct(plan.f, unvec(q, d, c.N));
        err[static_cast<std::size_t>(t)][static_cast<std::size_t>(d)] = (l_hat - l).squaredNorm() / energy;
      }
    });

    std::vector<double> mean(static_cast<std::size_t>(c.r) + 1, 0.0);
    for (const auto& row : err)
      for (std::size_t d = 0; d < row.size(); ++d) mean[d] += row[d];
    for (double& v : mean) v /= static_cast<double>(trials);
    std::size_t d_emp = 0;
    for (std::size_t d = 1; d < mean.size(); ++d)
      if (mean[d] < mean[d_emp]) d_emp = d;

    table.add_row({format_number(sigma2), format_count(d_theory), format_count(static_cast<long long>(d_emp)),
                   format_number(profile(d_theory) / energy),
                   format_number(mean[static_cast<std::size_t>(d_theory)]), format_number(mean[d_emp]),
                   std::to_string(c.seed), format_count(c.trials)});
  }
  return table;
}

namespace {

std::vector<std::string> two_step_columns() {
  return {"method", "sigma2", "m", "p", "nmse_mean", "nmse_stderr", "rank_match_fraction",
          "bound_violations", "bounds_undefined", "seed", "trials"};
}

std::vector<std::string> two_step_row(const ExperimentConfig& c, const char* method, double sigma2,
                                      Index m, const TwoStepStats& s) {
  const MeanStderr ms = mean_stderr(s.nmse);
  return {method,
          format_number(sigma2),
          format_count(m),
          format_count(two_step_sample_count(c.M, c.N, c.r, m)),
          format_number(ms.mean),
          format_number(ms.stderr_),
          format_number(static_cast<double>(s.rank_matches) / c.trials),
          format_count(s.violations),
          format_count(s.undefined),
          std::to_string(c.seed),
          format_count(c.trials)};
}

}  // namespace

Table fig_two_step_observations(const ExperimentConfig& c) {
  c.validate();
  Table table;
  table.columns = two_step_columns();
  const std::vector<Matrix> truths = all_truths(c);
  const auto grid = c.resolved_m_grid();
  const bool known = c.rank_mode != RankMode::estimated;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t g = 0; g < c.sigma2_grid.size(); ++g) {
      const std::uint64_t point = 1 + i * c.sigma2_grid.size() + g;
      const TwoStepStats s = run_two_step_trials(c, truths, grid[i], c.sigma2_grid[g], known, point);
      table.add_row(two_step_row(c, "two_step", c.sigma2_grid[g], grid[i], s));
    }
  return table;
}

Table fig_coherence(const ExperimentConfig& c) {
  c.validate();
  Table table;
  table.columns = {"p", "m", "mu_designed", "mu_designed_stderr", "mu_gaussian",
                   "mu_gaussian_stderr", "seed", "trials"};
  const bool gaussian = c.has_method("gaussian_map_reference");
  const auto draws = static_cast<std::size_t>(c.trials);
  for (std::size_t k = 0; k < c.p_grid.size(); ++k) {
    const Index p = c.p_grid[k];
    const Index m = columns_for_observations(p, c.M, c.N, c.r);
    std::vector<double> designed(draws), reference(draws);
    parallel_for_trials(c.trials, c.threads, [&](int t) {
      const auto i = static_cast<std::size_t>(t);
      Rng rng = make_rng(c.seed, trial_stream(1 + k, static_cast<std::uint64_t>(t)));
      // The designed map depends on the sampled columns and the learned subspace;
      // both come from a noiseless stage one on a fresh instance.
      const Matrix l = generate_low_rank(c.M, c.N, c.r, rng);
      const ColumnSample sample = sample_columns(l, m, c.P1, 0.0, rng);
      const Matrix u_hat = estimate_subspace(sample.y1, c.r).u_hat;
      designed[i] = averaged_mutual_coherence(two_step_operator(sample.z1, u_hat, c.M, c.N, c.P1, c.P2)).value;
      if (gaussian) reference[i] = averaged_mutual_coherence(gaussian_random(p, c.M, c.N, rng)).value;
    });
    const MeanStderr d = mean_stderr(designed);
    const MeanStderr g = gaussian ? mean_stderr(reference) : MeanStderr{std::nan(""), std::nan("")};
    table.add_row({format_count(p), format_count(m), format_number(d.mean), format_number(d.stderr_),
                   format_number(g.mean), format_number(g.stderr_), std::to_string(c.seed),
                   format_count(c.trials)});
  }
  return table;
}

namespace {

// Gaussian map rescaled to exactly the two-step power budget, so every method spends
// the same measurement energy.
AffineMap power_matched_gaussian(Index p, Index rows, Index cols, double power, Rng& rng) {
  Matrix s = standard_normal(p, rows * cols, rng);
  s *= std::sqrt(power / s.squaredNorm());
  return AffineMap(std::move(s), rows, cols, power);
}

struct BaselineStats {
  std::vector<double> nnm, mf;
  double nnm_iters = 0.0, mf_iters = 0.0;
};

BaselineStats run_baselines(const ExperimentConfig& c, const std::vector<Matrix>& truths, Index p,
                            double sigma2, std::uint64_t point, bool nnm, bool mf) {
  const auto n = static_cast<std::size_t>(c.trials);
  BaselineStats out;
  out.nnm.assign(n, 0.0);
  out.mf.assign(n, 0.0);
  std::vector<int> nnm_it(n, 0), mf_it(n, 0);
  parallel_for_trials(c.trials, c.threads, [&](int t) {
    const auto i = static_cast<std::size_t>(t);
    const Matrix& l = truths[i];
    Rng rng = make_rng(c.seed, trial_stream(point, static_cast<std::uint64_t>(t)));
    const AffineMap map = power_matched_gaussian(p, c.M, c.N, c.P1 + c.P2, rng);
    const Vector y = map.apply(l) + std::sqrt(sigma2) * standard_normal(p, rng);
    SolverOptions opts;
    opts.max_iters = c.solver_max_iters;
    opts.tol = c.solver_tol;
    opts.rank = c.r;
    opts.seed = derive_seed(c.seed, trial_stream(point, static_cast<std::uint64_t>(t)) + 1);
    if (nnm) {
      // The default tau scales with the noise level; a tiny floor keeps it finite at sigma^2 = 0.
      opts.tau = default_nnm_tau(map, std::max(sigma2, 1e-12));
      const SolverResult res = nnm_solve(map, y, opts);
      out.nnm[i] = sublr::nmse(res.estimate, l);
      nnm_it[i] = res.iterations;
    }
    if (mf) {
      const SolverResult res = mf_solve(map, y, opts);
      out.mf[i] = sublr::nmse(res.estimate, l);
      mf_it[i] = res.iterations;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    out.nnm_iters += nnm_it[i];
    out.mf_iters += mf_it[i];
  }
  out.nnm_iters /= static_cast<double>(n);
  out.mf_iters /= static_cast<double>(n);
  return out;
}

}  // namespace

Table fig_benchmark(const ExperimentConfig& c) {
  c.validate();
  Table table;
  table.columns = {"method", "sigma2", "p", "m", "nmse_mean", "nmse_stderr", "mean_iterations",
                   "bound_violations", "note", "seed", "trials"};
  const std::vector<Matrix> truths = all_truths(c);
  const bool known = c.rank_mode != RankMode::estimated;
  const std::string seed = std::to_string(c.seed);
  const std::string trials = format_count(c.trials);

  for (std::size_t k = 0; k < c.p_grid.size(); ++k) {
    const Index p = c.p_grid[k];
    const Index m = columns_for_observations(p, c.M, c.N, c.r);
    for (std::size_t g = 0; g < c.sigma2_grid.size(); ++g) {
      const double sigma2 = c.sigma2_grid[g];
      const std::uint64_t point = 1 + 2 * (k * c.sigma2_grid.size() + g);
      if (c.has_method("two_step")) {
        const TwoStepStats s = run_two_step_trials(c, truths, m, sigma2, known, point);
        const MeanStderr ms = mean_stderr(s.nmse);
        table.add_row({"two_step", format_number(sigma2), format_count(p), format_count(m),
                       format_number(ms.mean), format_number(ms.stderr_), "", format_count(s.violations),
                       "", seed, trials});
      }
      const bool nnm = c.has_method("nnm");
      const bool mf = c.has_method("mf");
      if (nnm || mf) {
        const BaselineStats b = run_baselines(c, truths, p, sigma2, point + 1, nnm, mf);
        if (nnm) {
          const MeanStderr ms = mean_stderr(b.nnm);
          table.add_row({"nnm", format_number(sigma2), format_count(p), "", format_number(ms.mean),
                         format_number(ms.stderr_), format_number(b.nnm_iters), "", "", seed, trials});
        }
        if (mf) {
          const MeanStderr ms = mean_stderr(b.mf);
          table.add_row({"mf", format_number(sigma2), format_count(p), "", format_number(ms.mean),
                         format_number(ms.stderr_), format_number(b.mf_iters), "", "", seed, trials});
        }
      }
    }
  }
  table.add_row({"sp", "", "490", "", "", "", "", "",
                 "SP recovery not implemented; it needs p = 490 observations", seed, trials});
  return table;
}

Table fig_rank_mode(const ExperimentConfig& c) {
  c.validate();
  Table table;
  table.columns = {"sigma2", "m", "nmse_true_rank", "stderr_true_rank", "nmse_estimated_rank",
                   "stderr_estimated_rank", "relative_gap", "rank_match_fraction", "diverged",
                   "seed", "trials"};
  const std::vector<Matrix> truths = all_truths(c);
  for (std::size_t g = 0; g < c.sigma2_grid.size(); ++g) {
    const double sigma2 = c.sigma2_grid[g];
    // Same stream for both modes: identical samples and noise whenever r_hat = r.
    const std::uint64_t point = 1 + g;
    const TwoStepStats known = run_two_step_trials(c, truths, c.m, sigma2, true, point);
    const TwoStepStats est = run_two_step_trials(c, truths, c.m, sigma2, false, point);
    const MeanStderr a = mean_stderr(known.nmse);
    const MeanStderr b = mean_stderr(est.nmse);
    const double gap = a.mean > 0.0 ? std::abs(b.mean - a.mean) / a.mean : std::abs(b.mean - a.mean);
    table.add_row({format_number(sigma2), format_count(c.m), format_number(a.mean), format_number(a.stderr_),
                   format_number(b.mean), format_number(b.stderr_), format_number(gap),
                   format_number(static_cast<double>(est.rank_matches) / c.trials),
                   gap > 0.2 ? "yes" : "no", std::to_string(c.seed), format_count(c.trials)});
  }
  return table;
}

}  // namespace sublr
