#pragma once

// Experiment configuration file: flat INI-style sections
// [source] [schedule] [sweep] [rcc] [output] [theory], `key = value` lines,
// '#' comments. Lists are comma-separated; matrix rows are ';'-separated.
// parse_config validates, fills documented defaults, and can emit a
// canonical form that re-parses to an identical configuration.

#include <Eigen/Dense>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rdpflow/harness.hpp"
#include "rdpflow/theory.hpp"

namespace rdpflow::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Grids for the `theory` subcommand tabulators.
struct TheorySpec {
  std::string table = "rdp";  // rdp | dp-scalar | dp-multivariate | mutual-info | achievable
  double sigma0 = 1.0;
  std::vector<double> lambdas;
  std::vector<double> alpha_bar_grid;
  std::vector<double> p_grid;
  std::vector<double> d_grid;
};

struct ParsedConfig {
  mc::ExperimentConfig experiment;
  TheorySpec theory;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

struct RawValue {
  std::string text;
  int line = 0;
  mutable bool used = false;
};

class RawConfig {
 public:
  std::string origin;
  std::map<std::string, RawValue> values;  // "section.key"

  const RawValue* find(const std::string& section, const std::string& key) const {
    auto it = values.find(section + "." + key);
    if (it == values.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  [[noreturn]] void fail(const std::string& field, const std::string& message) const {
    throw ConfigError(origin + ": " + field + ": " + message);
  }

  double number(const std::string& section, const std::string& key, double fallback) const {
    const RawValue* v = find(section, key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      const double out = std::stod(v->text, &pos);
      if (trim(v->text.substr(pos)).empty()) return out;
    } catch (const std::exception&) {
    }
    fail(section + "." + key, "expected a number, got '" + v->text + "'");
  }

  std::int64_t integer(const std::string& section, const std::string& key,
                       std::int64_t fallback) const {
    const double d = number(section, key, static_cast<double>(fallback));
    if (d != std::floor(d)) fail(section + "." + key, "expected an integer");
    return static_cast<std::int64_t>(d);
  }

  std::string word(const std::string& section, const std::string& key,
                   const std::string& fallback) const {
    const RawValue* v = find(section, key);
    return v ? trim(v->text) : fallback;
  }

  std::vector<double> list(const std::string& section, const std::string& key) const {
    const RawValue* v = find(section, key);
    if (!v) return {};
    std::vector<double> out;
    std::string item;
    std::stringstream ss(v->text);
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        std::size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (!trim(item.substr(pos)).empty()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        fail(section + "." + key, "bad list element '" + item + "'");
      }
    }
    if (out.empty()) fail(section + "." + key, "empty list");
    return out;
  }

  Eigen::MatrixXd matrix(const std::string& section, const std::string& key) const {
    const RawValue* v = find(section, key);
    if (!v) return {};
    std::vector<std::vector<double>> rows;
    std::string row_text;
    std::stringstream ss(v->text);
    while (std::getline(ss, row_text, ';')) {
      std::vector<double> row;
      std::stringstream rs(row_text);
      double x;
      while (rs >> x) row.push_back(x);
      if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(section + "." + key, "empty matrix");
    Eigen::MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size())
        fail(section + "." + key, "ragged matrix rows");
      for (std::size_t j = 0; j < rows[i].size(); ++j)
        m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
    return m;
  }
};

inline RawConfig read_raw(std::istream& in, const std::string& origin) {
  RawConfig raw;
  raw.origin = origin;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": key outside any [section]");
    const std::string key = trim(line.substr(0, eq));
    raw.values[section + "." + key] = RawValue{trim(line.substr(eq + 1)), lineno, false};
  }
  return raw;
}

inline const std::map<std::string, std::string>& known_keys() {
  static const std::map<std::string, std::string> keys = {
      {"source.kind", ""},        {"source.mu", ""},          {"source.sigma2", ""},
      {"source.mean", ""},        {"source.cov", ""},         {"source.weights", ""},
      {"source.means", ""},       {"source.variances", ""},   {"schedule.steps", ""},
      {"schedule.beta_min", ""},  {"schedule.beta_max", ""},  {"sweep.t_grid", ""},
      {"sweep.t_bits_grid", ""},  {"sweep.rho_grid", ""},     {"sweep.trials", ""},
      {"sweep.rate_mode", ""},    {"sweep.decode_mode", ""},  {"sweep.seed", ""},
      {"sweep.threads", ""},      {"rcc.cap", ""},            {"output.precision", ""},
      {"theory.table", ""},       {"theory.sigma0", ""},      {"theory.lambdas", ""},
      {"theory.alpha_bar_grid", ""}, {"theory.p_grid", ""},   {"theory.d_grid", ""},
  };
  return keys;
}

}  // namespace detail

inline ParsedConfig parse_config_stream(std::istream& in, const std::string& origin) {
  const detail::RawConfig raw = detail::read_raw(in, origin);
  for (const auto& [key, value] : raw.values)
    if (!detail::known_keys().count(key))
      throw ConfigError(origin + ":" + std::to_string(value.line) + ": unknown key '" + key +
                        "'");

  ParsedConfig out;
  mc::ExperimentConfig& exp = out.experiment;

  const std::string kind = raw.word("source", "kind", "scalar-gaussian");
  if (kind == "scalar-gaussian") {
    exp.source.kind = mc::SourceKind::kScalarGaussian;
    exp.source.mu = raw.number("source", "mu", 0.0);
    exp.source.sigma2 = raw.number("source", "sigma2", 1.0);
    if (!(exp.source.sigma2 > 0.0)) raw.fail("source.sigma2", "must be positive");
  } else if (kind == "multivariate-gaussian") {
    exp.source.kind = mc::SourceKind::kMultivariateGaussian;
    const std::vector<double> mean = raw.list("source", "mean");
    if (mean.empty()) raw.fail("source.mean", "required for multivariate-gaussian");
    exp.source.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                                        static_cast<int>(mean.size()));
    exp.source.cov = raw.matrix("source", "cov");
    if (exp.source.cov.size() == 0) raw.fail("source.cov", "required for multivariate-gaussian");
    if (exp.source.cov.rows() != exp.source.mean.size() ||
        exp.source.cov.cols() != exp.source.mean.size())
      raw.fail("source.cov", "shape does not match source.mean");
  } else if (kind == "gmm-1d") {
    exp.source.kind = mc::SourceKind::kGmm1d;
    exp.source.weights = raw.list("source", "weights");
    exp.source.means = raw.list("source", "means");
    exp.source.variances = raw.list("source", "variances");
    if (exp.source.weights.size() != exp.source.means.size() ||
        exp.source.weights.size() != exp.source.variances.size())
      raw.fail("source.weights", "weights/means/variances lengths differ");
  } else {
    raw.fail("source.kind", "expected scalar-gaussian | multivariate-gaussian | gmm-1d");
  }

  exp.schedule.steps = static_cast<int>(raw.integer("schedule", "steps", 1000));
  exp.schedule.beta_min = raw.number("schedule", "beta_min", 1e-4);
  exp.schedule.beta_max = raw.number("schedule", "beta_max", 0.02);
  if (exp.schedule.steps < 1) raw.fail("schedule.steps", "must be >= 1");
  if (!(exp.schedule.beta_min > 0.0 && exp.schedule.beta_min <= exp.schedule.beta_max &&
        exp.schedule.beta_max < 1.0))
    raw.fail("schedule.beta_min", "need 0 < beta_min <= beta_max < 1");

  const std::vector<double> t_raw = raw.find("sweep", "t_grid")
                                        ? raw.list("sweep", "t_grid")
                                        : std::vector<double>{};
  const std::vector<double> t_bits = raw.find("sweep", "t_bits_grid")
                                         ? raw.list("sweep", "t_bits_grid")
                                         : std::vector<double>{};
  const NoiseSchedule sched = mc::build_schedule(exp.schedule);
  if (!t_raw.empty() && !t_bits.empty())
    raw.fail("sweep.t_grid", "give either t_grid or t_bits_grid, not both");
  if (!t_bits.empty()) {
    if (exp.source.kind != mc::SourceKind::kScalarGaussian)
      raw.fail("sweep.t_bits_grid", "bit targets need a scalar Gaussian source");
    const double sigma0 = std::sqrt(exp.source.sigma2);
    for (double b : t_bits) {
      if (!(b > 0.0)) raw.fail("sweep.t_bits_grid", "bit targets must be positive");
      int best = 1;
      double best_gap = std::numeric_limits<double>::infinity();
      for (int t = 1; t <= sched.steps(); ++t) {
        const double gap =
            std::fabs(theory::bits(theory::mutual_info(sigma0, sched.alpha_bar(t))) - b);
        if (gap < best_gap) {
          best_gap = gap;
          best = t;
        }
      }
      exp.t_grid.push_back(best);
    }
  } else {
    for (std::size_t i = 0; i < t_raw.size(); ++i) {
      const double t = t_raw[i];
      if (t != std::floor(t) || t < 1 || t > sched.steps())
        raw.fail("sweep.t_grid[" + std::to_string(i) + "]",
                 "t = " + std::to_string(static_cast<long long>(t)) + " outside [1, T=" +
                     std::to_string(sched.steps()) + "]");
      exp.t_grid.push_back(static_cast<int>(t));
    }
  }
  if (exp.t_grid.empty()) raw.fail("sweep.t_grid", "a nonempty t grid is required");

  const std::vector<double> rho = raw.find("sweep", "rho_grid")
                                      ? raw.list("sweep", "rho_grid")
                                      : std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t i = 0; i < rho.size(); ++i)
    if (!(rho[i] >= 0.0 && rho[i] <= 1.0))
      raw.fail("sweep.rho_grid[" + std::to_string(i) + "]", "rho must lie in [0,1]");
  exp.rho_grid = rho;

  exp.trials = raw.integer("sweep", "trials", 100000);
  if (exp.trials < 1) raw.fail("sweep.trials", "must be >= 1");
  const std::string rate = raw.word("sweep", "rate_mode", "kl");
  if (rate == "kl")
    exp.rate_mode = mc::RateMode::kKl;
  else if (rate == "zipf")
    exp.rate_mode = mc::RateMode::kZipf;
  else
    raw.fail("sweep.rate_mode", "expected kl | zipf");
  const std::string mode = raw.word("sweep", "decode_mode", "closed-form-zt");
  if (mode == "closed-form-zt")
    exp.decode_mode = mc::DecodeMode::kClosedFormZt;
  else if (mode == "full-chain")
    exp.decode_mode = mc::DecodeMode::kFullChain;
  else
    raw.fail("sweep.decode_mode", "expected closed-form-zt | full-chain");
  if (exp.decode_mode == mc::DecodeMode::kFullChain) {
    if (exp.source.kind == mc::SourceKind::kGmm1d)
      raw.fail("sweep.decode_mode", "full-chain mode needs a Gaussian source model");
    for (int t : exp.t_grid)
      if (t > sched.steps() - 1)
        raw.fail("sweep.t_grid", "full-chain mode needs every t <= T-1");
  }
  if (exp.rate_mode == mc::RateMode::kZipf && exp.decode_mode != mc::DecodeMode::kFullChain)
    raw.fail("sweep.rate_mode", "zipf rate accounting needs decode_mode = full-chain");
  exp.seed = static_cast<std::uint64_t>(raw.integer("sweep", "seed", 1));
  exp.threads = static_cast<int>(raw.integer("sweep", "threads", 0));
  exp.pfr_cap = static_cast<std::uint64_t>(raw.integer("rcc", "cap", 0));

  const std::int64_t precision = raw.integer("output", "precision", 17);
  if (precision != 17) raw.fail("output.precision", "only 17 significant digits are supported");

  TheorySpec& th = out.theory;
  th.table = raw.word("theory", "table", "rdp");
  if (th.table != "rdp" && th.table != "dp-scalar" && th.table != "dp-multivariate" &&
      th.table != "mutual-info" && th.table != "achievable")
    raw.fail("theory.table",
             "expected rdp | dp-scalar | dp-multivariate | mutual-info | achievable");
  th.sigma0 = raw.number("theory", "sigma0", 1.0);
  th.lambdas = raw.find("theory", "lambdas") ? raw.list("theory", "lambdas")
                                             : std::vector<double>{};
  th.alpha_bar_grid = raw.find("theory", "alpha_bar_grid")
                          ? raw.list("theory", "alpha_bar_grid")
                          : std::vector<double>{};
  th.p_grid = raw.find("theory", "p_grid") ? raw.list("theory", "p_grid")
                                           : std::vector<double>{};
  th.d_grid = raw.find("theory", "d_grid") ? raw.list("theory", "d_grid")
                                           : std::vector<double>{};
  return out;
}

inline ParsedConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  return parse_config_stream(in, path);
}

namespace detail {
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
inline std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out;
}
}  // namespace detail

// Canonical text form: every field explicit (defaults echoed), stable order.
inline std::string canonical_config(const ParsedConfig& cfg) {
  const mc::ExperimentConfig& exp = cfg.experiment;
  std::ostringstream os;
  os << "[source]\n";
  switch (exp.source.kind) {
    case mc::SourceKind::kScalarGaussian:
      os << "kind = scalar-gaussian\n";
      os << "mu = " << detail::fmt(exp.source.mu) << "\n";
      os << "sigma2 = " << detail::fmt(exp.source.sigma2) << "\n";
      break;
    case mc::SourceKind::kMultivariateGaussian: {
      os << "kind = multivariate-gaussian\n";
      os << "mean = ";
      for (int i = 0; i < exp.source.mean.size(); ++i)
        os << (i ? ", " : "") << detail::fmt(exp.source.mean[i]);
      os << "\ncov = ";
      for (int i = 0; i < exp.source.cov.rows(); ++i) {
        if (i) os << "; ";
        for (int j = 0; j < exp.source.cov.cols(); ++j)
          os << (j ? " " : "") << detail::fmt(exp.source.cov(i, j));
      }
      os << "\n";
      break;
    }
    case mc::SourceKind::kGmm1d:
      os << "kind = gmm-1d\n";
      os << "weights = " << detail::fmt_list(exp.source.weights) << "\n";
      os << "means = " << detail::fmt_list(exp.source.means) << "\n";
      os << "variances = " << detail::fmt_list(exp.source.variances) << "\n";
      break;
  }
  os << "\n[schedule]\n";
  os << "steps = " << exp.schedule.steps << "\n";
  os << "beta_min = " << detail::fmt(exp.schedule.beta_min) << "\n";
  os << "beta_max = " << detail::fmt(exp.schedule.beta_max) << "\n";
  os << "\n[sweep]\n";
  os << "t_grid = ";
  for (std::size_t i = 0; i < exp.t_grid.size(); ++i) os << (i ? ", " : "") << exp.t_grid[i];
  os << "\nrho_grid = " << detail::fmt_list(exp.rho_grid) << "\n";
  os << "trials = " << exp.trials << "\n";
  os << "rate_mode = " << (exp.rate_mode == mc::RateMode::kKl ? "kl" : "zipf") << "\n";
  os << "decode_mode = "
     << (exp.decode_mode == mc::DecodeMode::kClosedFormZt ? "closed-form-zt" : "full-chain")
     << "\n";
  os << "seed = " << exp.seed << "\n";
  os << "threads = " << exp.threads << "\n";
  os << "\n[rcc]\ncap = " << exp.pfr_cap << "\n";
  os << "\n[output]\nprecision = 17\n";
  os << "\n[theory]\n";
  os << "table = " << cfg.theory.table << "\n";
  os << "sigma0 = " << detail::fmt(cfg.theory.sigma0) << "\n";
  if (!cfg.theory.lambdas.empty())
    os << "lambdas = " << detail::fmt_list(cfg.theory.lambdas) << "\n";
  if (!cfg.theory.alpha_bar_grid.empty())
    os << "alpha_bar_grid = " << detail::fmt_list(cfg.theory.alpha_bar_grid) << "\n";
  if (!cfg.theory.p_grid.empty()) os << "p_grid = " << detail::fmt_list(cfg.theory.p_grid) << "\n";
  if (!cfg.theory.d_grid.empty()) os << "d_grid = " << detail::fmt_list(cfg.theory.d_grid) << "\n";
  return os.str();
}

}  // namespace rdpflow::cli
