// Monte-Carlo figure runner. Writes <out>/<figure>.csv and <out>/<figure>.manifest.txt.
//
// Settings resolve in order: built-in defaults, --config file, BENCH_OUT_DIR, flags.
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include "sublr/config.hpp"
#include "sublr/errors.hpp"
#include "sublr/experiments.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericalError = 2;

using Figure = std::function<sublr::Table(const sublr::ExperimentConfig&)>;

const std::map<std::string, Figure>& figures() {
  static const std::map<std::string, Figure> table{
      {"fig-optimal-d", sublr::fig_optimal_d},
      {"fig-observations", sublr::fig_two_step_observations},
      {"fig-coherence", sublr::fig_coherence},
      {"fig-benchmark", sublr::fig_benchmark},
      {"fig-rank-mode", sublr::fig_rank_mode},
  };
  return table;
}

struct Flags {
  std::string config_file;
  std::optional<long long> M, N, r, m, trials;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> sigma2, p, out, rank_mode;
};

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sublr::ConfigError("cannot write '" + path.string() + "'");
  body(out);
  if (!out) throw sublr::ConfigError("write failed for '" + path.string() + "'");
}

sublr::ExperimentConfig resolve(const Flags& f) {
  sublr::ExperimentConfig c;
  if (!f.config_file.empty()) c = sublr::load_config_file(f.config_file, c);
  if (const char* env = std::getenv("BENCH_OUT_DIR"); env && *env) c.out_dir = env;

  std::map<std::string, std::string> overrides;
  auto put = [&](const char* key, const auto& value) {
    if (value) overrides[key] = std::to_string(*value);
  };
  put("M", f.M);
  put("N", f.N);
  put("r", f.r);
  put("m", f.m);
  put("trials", f.trials);
  put("seed", f.seed);
  put("threads", f.threads);
  if (f.sigma2) overrides["sigma2"] = *f.sigma2;
  if (f.p) overrides["p"] = *f.p;
  if (f.out) overrides["out"] = *f.out;
  if (f.rank_mode) overrides["rank_mode"] = *f.rank_mode;
  sublr::apply_overrides(c, overrides);
  c.validate();
  return c;
}

int run(const std::string& name, const Flags& flags) {
  const sublr::ExperimentConfig config = resolve(flags);
  if (config.trials < 1000)
    std::cerr << "warning: " << config.trials << " trials; the reference figures average 1000\n";

  const auto start = std::chrono::steady_clock::now();
  const sublr::Table table = figures().at(name)(config);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  const std::string stem = name.substr(4);  // drop "fig-"
  write_file(dir / (stem + ".csv"), [&](std::ostream& out) { table.write_csv(out); });
  write_file(dir / (stem + ".manifest.txt"), [&](std::ostream& out) {
    out << "figure = " << name << '\n' << config.manifest();
  });
  std::cerr << name << ": " << table.rows.size() << " rows in " << seconds << " s -> "
            << (dir / (stem + ".csv")).string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo experiments for two-step low-rank matrix recovery"};
  app.require_subcommand(1);

  Flags flags;
  for (const auto& [name, _] : figures()) {
    CLI::App* sub = app.add_subcommand(name, "write " + name.substr(4) + ".csv");
    sub->add_option("--config", flags.config_file, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--M", flags.M, "rows of L");
    sub->add_option("--N", flags.N, "columns of L");
    sub->add_option("--r", flags.r, "rank of L");
    sub->add_option("--m", flags.m, "stage-one columns");
    sub->add_option("--sigma2", flags.sigma2, "comma-separated noise variances");
    sub->add_option("--p", flags.p, "comma-separated observation counts");
    sub->add_option("--trials", flags.trials, "Monte-Carlo trials per grid point");
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--threads", flags.threads, "worker threads, 0 for all cores");
    sub->add_option("--rank-mode", flags.rank_mode, "true, estimated or both");
    sub->add_option("--out", flags.out, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return run(name, flags);
  } catch (const sublr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const sublr::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}
