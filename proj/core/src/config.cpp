#include "sublr/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sublr {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
  }
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("config: '" + key + "' expects an integer, got '" + text + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("config: '" + key + "' expects an unsigned 64-bit integer, got '" + text + "'");
  return v;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

const char* rank_mode_name(RankMode mode) {
  switch (mode) {
    case RankMode::known:
      return "true";
    case RankMode::estimated:
      return "estimated";
    case RankMode::both:
      return "both";
  }
  return "both";
}

const std::vector<std::string> kMethods{"two_step", "nnm", "mf", "gaussian_map_reference"};

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_double("list", item));
  return out;
}

std::vector<Index> parse_index_list(const std::string& text) {
  std::vector<Index> out;
  for (const auto& item : split_list(text)) out.push_back(static_cast<Index>(parse_integer("list", item)));
  return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

void apply_overrides(ExperimentConfig& c, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    if (key == "M") c.M = parse_integer(key, value);
    else if (key == "N") c.N = parse_integer(key, value);
    else if (key == "r") c.r = parse_integer(key, value);
    else if (key == "m") c.m = parse_integer(key, value);
    else if (key == "m_grid") c.m_grid = parse_index_list(value);
    else if (key == "sigma2") c.sigma2_grid = parse_double_list(value);
    else if (key == "p") c.p_grid = parse_index_list(value);
    else if (key == "P1") c.P1 = parse_double(key, value);
    else if (key == "P2") c.P2 = parse_double(key, value);
    else if (key == "design_power") c.design_power = parse_double(key, value);
    else if (key == "trials") c.trials = static_cast<int>(parse_integer(key, value));
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "methods") c.methods = split_list(value);
    else if (key == "threads") c.threads = static_cast<unsigned>(parse_integer(key, value));
    else if (key == "solver_max_iters") c.solver_max_iters = static_cast<int>(parse_integer(key, value));
    else if (key == "solver_tol") c.solver_tol = parse_double(key, value);
    else if (key == "out") c.out_dir = value;
    else if (key == "rank_mode") {
      if (value == "true" || value == "known") c.rank_mode = RankMode::known;
      else if (value == "estimated") c.rank_mode = RankMode::estimated;
      else if (value == "both") c.rank_mode = RankMode::both;
      else throw ConfigError("config: rank_mode must be true, estimated or both");
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_overrides(base, parse_key_values(buffer.str()));
  return base;
}

void ExperimentConfig::validate() const {
  if (M < 1 || N < 1) throw ConfigError("config: M and N must be >= 1");
  if (r < 1 || r > std::min(M, N)) throw ConfigError("config: r must satisfy 1 <= r <= min(M, N)");
  if (m < 1 || m > N) throw ConfigError("config: m must satisfy 1 <= m <= N");
  for (Index v : resolved_m_grid())
    if (v < r || v > N) throw ConfigError("config: every m in m_grid must lie in [r, N]");
  if (trials < 1) throw ConfigError("config: trials must be >= 1");
  if (sigma2_grid.empty()) throw ConfigError("config: sigma2 grid is empty");
  if (p_grid.empty()) throw ConfigError("config: p grid is empty");
  for (double s : sigma2_grid)
    if (s < 0.0) throw ConfigError("config: sigma2 values must be >= 0");
  for (Index p : p_grid)
    if (p < 1) throw ConfigError("config: p values must be >= 1");
  if (P1 <= 0.0 || P2 <= 0.0 || design_power <= 0.0)
    throw ConfigError("config: powers must be positive");
  if (solver_max_iters < 1 || solver_tol <= 0.0)
    throw ConfigError("config: solver_max_iters >= 1 and solver_tol > 0 required");
  if (methods.empty()) throw ConfigError("config: methods is empty");
  for (const auto& name : methods)
    if (std::find(kMethods.begin(), kMethods.end(), name) == kMethods.end())
      throw ConfigError("config: unknown method '" + name + "'");
}

std::vector<Index> ExperimentConfig::resolved_m_grid() const {
  if (!m_grid.empty()) return m_grid;
  // {r, 1.5r, 2r, 2.5r}, rounded up.
  return {r, (3 * r + 1) / 2, 2 * r, (5 * r + 1) / 2};
}

bool ExperimentConfig::has_method(const std::string& name) const {
  return std::find(methods.begin(), methods.end(), name) != methods.end();
}

std::string ExperimentConfig::manifest() const {
  std::ostringstream out;
  out.precision(17);
  out << "M = " << M << '\n'
      << "N = " << N << '\n'
      << "r = " << r << '\n'
      << "m = " << m << '\n'
      << "m_grid = " << join(resolved_m_grid()) << '\n'
      << "sigma2 = " << join(sigma2_grid) << '\n'
      << "p = " << join(p_grid) << '\n'
      << "P1 = " << P1 << '\n'
      << "P2 = " << P2 << '\n'
      << "design_power = " << design_power << '\n'
      << "trials = " << trials << '\n'
      << "seed = " << seed << '\n'
      << "methods = " << join(methods) << '\n'
      << "rank_mode = " << rank_mode_name(rank_mode) << '\n'
      << "solver_max_iters = " << solver_max_iters << '\n'
      << "solver_tol = " << solver_tol << '\n';
  return out.str();
}

}  // namespace sublr
