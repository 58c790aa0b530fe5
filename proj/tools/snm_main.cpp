// Command line driver: radius / verify / experiment.
//
// Config file: INI-style sections of key = value pairs ('#' or ';' comments).
// Every key is listed in kKnownKeys below; unknown keys are rejected before
// any computation, and no output file is written unless the whole
// configuration validates. Matrices use the literal forms identity[:c],
// diag:[...] and dense:[[...]].
//
// Exit codes:
//   0  success
//   2  configuration / input error (total rejection, no partial outputs)
//   3  radius: burn-in condition violated (margins printed)
//   4  verify: at least one assertion falsified (named in the summary)

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "snm/bounds.hpp"
#include "snm/experiments.hpp"
#include "snm/io.hpp"
#include "snm/martingale.hpp"
#include "snm/matrix_spec.hpp"
#include "snm/simulate.hpp"
#include "snm/verification.hpp"

namespace {

using json = nlohmann::json;
using namespace snm;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBurnin = 3;
constexpr int kExitFalsified = 4;

/// Configuration problem with a field path; always maps to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Key/value configuration.
// ---------------------------------------------------------------------------

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "run.d", "run.seed", "run.trials", "run.threads", "run.out_dir",
      "bound.kind", "bound.delta", "bound.sigma_subg_sq",
      "bound.sigma_var_sq", "bound.b_w", "bound.eps", "bound.nu",
      "bound.gamma", "bound.v", "bound.b_x_sq",
      "noise.kind", "noise.b", "noise.p", "noise.s",
      "covariates.kind", "covariates.radius", "covariates.design",
      "covariates.transition",
      "radius.log",
      "verify.suite", "verify.t_max", "verify.n_paths", "verify.n_samples",
      "verify.lambda_grid", "verify.instances_per_dim", "verify.dims",
      "verify.rule_threshold",
      "experiment.kind", "experiment.horizon", "experiment.arms",
      "experiment.theta_star", "experiment.provider",
      "experiment.fixed_radius", "experiment.t_grid",
  };
  return keys;
}

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return std::string();
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    out.push_back(strip(s.substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

class Config {
 public:
  void set(const std::string& key, const std::string& value) {
    if (known_keys().count(key) == 0) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    kv_[key] = value;
  }

  /// `spec` has the form section.key=value (used by --set).
  void set_from_spec(const std::string& spec) {
    std::size_t eq = spec.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects section.key=value, got '" + spec +
                        "'");
    }
    set(strip(spec.substr(0, eq)), strip(spec.substr(eq + 1)));
  }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    std::string section;
    std::int64_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string t = strip(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') {
          throw ConfigError(path + ":" + std::to_string(lineno) +
                            ": malformed section header '" + t + "'");
        }
        section = strip(t.substr(1, t.size() - 2));
        if (section.empty()) {
          throw ConfigError(path + ":" + std::to_string(lineno) +
                            ": empty section name");
        }
        continue;
      }
      std::size_t eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": expected key = value, got '" + t + "'");
      }
      std::string key = strip(t.substr(0, eq));
      if (key.empty()) {
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": empty key");
      }
      if (section.empty()) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": key '" +
                          key + "' outside any [section]");
      }
      try {
        set(section + "." + key, strip(t.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": " +
                          e.what());
      }
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    double v = 0.0;
    if (!parse_double(it->second, v)) {
      throw ConfigError("config key '" + key + "': not a number: '" +
                        it->second + "'");
    }
    return v;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::int64_t v = 0;
    if (!parse_int(it->second, v)) {
      throw ConfigError("config key '" + key + "': not an integer: '" +
                        it->second + "'");
    }
    return v;
  }

  MatrixSpec get_matrix(const std::string& key,
                        const std::string& fallback_literal) const {
    std::string text = get_string(key, fallback_literal);
    try {
      return MatrixSpec::parse(text);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

  SymMatrixd get_matrix_at(const std::string& key, Index d,
                           const std::string& fallback_literal) const {
    MatrixSpec spec = get_matrix(key, fallback_literal);
    try {
      return spec.realize(d);
    } catch (const std::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

  /// JSON vector literal, e.g. [0.5, 0.2].
  Vecd get_vec(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) {
      throw ConfigError("config key '" + key + "' is required");
    }
    try {
      json j = json::parse(it->second);
      if (!j.is_array() || j.empty()) {
        throw ConfigError("config key '" + key +
                          "': expected a non-empty array");
      }
      Vecd v(static_cast<Index>(j.size()));
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
          throw ConfigError("config key '" + key +
                            "': expected numeric entries");
        }
        v[static_cast<Index>(i)] = j[i].get<double>();
      }
      return v;
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

  /// JSON list of equal-length vectors, e.g. [[1,0],[0,1]].
  std::vector<Vecd> get_rows(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) {
      throw ConfigError("config key '" + key + "' is required");
    }
    try {
      json j = json::parse(it->second);
      if (!j.is_array() || j.empty()) {
        throw ConfigError("config key '" + key +
                          "': expected a non-empty array of rows");
      }
      std::vector<Vecd> rows;
      for (const auto& row : j) {
        if (!row.is_array() || row.empty()) {
          throw ConfigError("config key '" + key +
                            "': rows must be non-empty arrays");
        }
        Vecd v(static_cast<Index>(row.size()));
        for (std::size_t i = 0; i < row.size(); ++i) {
          if (!row[i].is_number()) {
            throw ConfigError("config key '" + key +
                              "': expected numeric entries");
          }
          v[static_cast<Index>(i)] = row[i].get<double>();
        }
        rows.push_back(std::move(v));
      }
      return rows;
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

  std::vector<Index> get_dims(const std::string& key,
                              const std::string& fallback) const {
    std::vector<Index> dims;
    for (const std::string& part : split(get_string(key, fallback), ',')) {
      std::int64_t v = 0;
      if (!parse_int(part, v) || v < 1) {
        throw ConfigError("config key '" + key +
                          "': expected positive integers, got '" + part +
                          "'");
      }
      dims.push_back(static_cast<Index>(v));
    }
    return dims;
  }

 private:
  std::map<std::string, std::string> kv_;
};

// ---------------------------------------------------------------------------
// Model builders.
// ---------------------------------------------------------------------------

NoiseModeld build_noise(const Config& cfg) {
  std::string kind = cfg.get_string("noise.kind", "rademacher_scaled");
  double b = cfg.get_double("noise.b", 1.0);
  if (kind == "rademacher_scaled") return NoiseModeld::rademacher_scaled(b);
  if (kind == "two_point") {
    return NoiseModeld::two_point(cfg.get_double("noise.p", 0.5), b);
  }
  if (kind == "uniform") return NoiseModeld::uniform(b);
  if (kind == "truncated_gaussian") {
    return NoiseModeld::truncated_gaussian(cfg.get_double("noise.s", 1.0), b);
  }
  throw ConfigError(
      "config key 'noise.kind': expected rademacher_scaled, two_point, "
      "uniform or truncated_gaussian, got '" +
      kind + "'");
}

CovariateModeld build_covariates(const Config& cfg, Index d) {
  std::string kind = cfg.get_string("covariates.kind", "random_sphere");
  double radius = cfg.get_double("covariates.radius", 1.0);
  if (kind == "random_sphere") return CovariateModeld::random_sphere(d, radius);
  if (kind == "fixed_design") {
    return CovariateModeld::fixed_design(cfg.get_rows("covariates.design"));
  }
  if (kind == "ar1") {
    SymMatrixd a = cfg.get_matrix_at("covariates.transition", d, "identity:0.5");
    return CovariateModeld::ar1(a.mat(), radius);
  }
  throw ConfigError(
      "config key 'covariates.kind': expected random_sphere, fixed_design "
      "or ar1, got '" +
      kind + "'");
}

BoundKind parse_bound_kind(const std::string& name) {
  if (name == "subgaussian") return BoundKind::SubGaussian;
  if (name == "bernstein") return BoundKind::Bernstein;
  if (name == "unregularized") return BoundKind::UnregularizedSubGaussian;
  throw ConfigError(
      "config key 'bound.kind': expected subgaussian, bernstein or "
      "unregularized, got '" +
      name + "'");
}

struct RunParams {
  Index d = 2;
  std::uint64_t seed = 1;
  std::int64_t trials = 1000;
  int threads = 1;
  std::string out_dir;
};

RunParams build_run(const Config& cfg) {
  RunParams run;
  std::int64_t d = cfg.get_int("run.d", 2);
  if (d < 1) throw ConfigError("config key 'run.d': must be >= 1");
  run.d = static_cast<Index>(d);
  std::int64_t seed = cfg.get_int("run.seed", 1);
  run.seed = static_cast<std::uint64_t>(seed);
  run.trials = cfg.get_int("run.trials", 1000);
  if (run.trials < 1) throw ConfigError("config key 'run.trials': must be >= 1");
  std::int64_t threads = cfg.get_int("run.threads", 1);
  if (threads < 0) throw ConfigError("config key 'run.threads': must be >= 0");
  run.threads = static_cast<int>(threads);
  run.out_dir = cfg.get_string("run.out_dir", "out");
  return run;
}

/// Simulation spec shared by verify and experiment: the noise model is the
/// single source of truth for the variance proxies.
TrialSpec<double> build_trial_spec(const Config& cfg, const RunParams& run,
                                   BoundKind bound, std::int64_t t_max) {
  TrialSpec<double> spec;
  spec.d = run.d;
  spec.noise = build_noise(cfg);
  spec.covariates = build_covariates(cfg, run.d);
  spec.gamma = cfg.get_matrix_at("bound.gamma", run.d, "identity:1");
  spec.rule = RuleKind::FixedHorizon;
  spec.t_max = t_max;
  spec.bound = bound;
  spec.delta = cfg.get_double("bound.delta", 0.05);
  spec.v = cfg.get_matrix_at("bound.v", run.d, "identity:16");
  spec.eps = cfg.get_double("bound.eps", 0.1);
  spec.nu = cfg.get_double("bound.nu", 0.1);
  spec.seed = run.seed;
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Output plumbing. Files are staged in memory and flushed only after the
// whole command has computed, so a rejected configuration leaves nothing
// behind.
// ---------------------------------------------------------------------------

struct OutputStage {
  std::string out_dir;
  std::vector<std::pair<std::string, std::string>> files;  ///< name -> bytes

  void add(const std::string& name, std::string bytes) {
    files.emplace_back(name, std::move(bytes));
  }

  void flush() const {
    if (files.empty()) return;
    std::filesystem::create_directories(out_dir);
    for (const auto& [name, bytes] : files) {
      std::filesystem::path path = std::filesystem::path(out_dir) / name;
      std::ofstream os(path, std::ios::binary);
      if (!os) throw ConfigError("cannot write output file '" + path.string() + "'");
      os << bytes;
    }
  }
};

std::string bool_text(bool v) { return v ? "true" : "false"; }

// ---------------------------------------------------------------------------
// radius: replay an observation log and print one bound report.
// ---------------------------------------------------------------------------

int cmd_radius(const Config& cfg) {
  RunParams run = build_run(cfg);
  std::string bound_name = cfg.get_string("bound.kind", "subgaussian");
  BoundKind bound = parse_bound_kind(bound_name);
  SymMatrixd gamma = cfg.get_matrix_at("bound.gamma", run.d, "identity:1");
  double delta = cfg.get_double("bound.delta", 0.05);
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw ConfigError("config key 'bound.delta': must be in (0,1)");
  }

  std::string log_path = cfg.get_string("radius.log", "");
  if (log_path.empty()) {
    throw ConfigError("radius: an observation log is required (--log or radius.log)");
  }
  std::ifstream is(log_path);
  if (!is) throw ConfigError("cannot open observation log '" + log_path + "'");
  std::vector<Observationd> log;
  try {
    log = read_observation_csv(is);
  } catch (const std::exception& e) {
    throw ConfigError(std::string(e.what()));
  }
  if (!log.empty() && log.front().x.size() != run.d) {
    throw ConfigError("observation log dimension " +
                      std::to_string(log.front().x.size()) +
                      " differs from configured run.d = " +
                      std::to_string(run.d));
  }

  SubGaussianParams<double> sub_params{
      cfg.get_double("bound.sigma_subg_sq", 1.0), delta, gamma};
  BernsteinParams<double> bern_params;
  if (bound == BoundKind::Bernstein) {
    bern_params.sigma_var_sq = cfg.get_double("bound.sigma_var_sq", 1.0);
    bern_params.b_w = cfg.get_double("bound.b_w", 1.0);
    bern_params.b_x_sq = cfg.get_matrix_at("bound.b_x_sq", run.d, "identity:1");
    bern_params.gamma = gamma;
    bern_params.v = cfg.get_matrix_at("bound.v", run.d, "identity:16");
    bern_params.eps = cfg.get_double("bound.eps", 0.1);
    bern_params.nu = cfg.get_double("bound.nu", 0.1);
    bern_params.delta = delta;
    bern_params.validate();
    for (const Observationd& ob : log) {
      if (std::abs(ob.w) > bern_params.b_w) {
        throw ConfigError("observation log row " + std::to_string(ob.t) +
                          ": |w| = " + fmt_shortest(std::abs(ob.w)) +
                          " exceeds b_w = " + fmt_shortest(bern_params.b_w));
      }
    }
  } else {
    sub_params.validate();
  }

  MartingaleState<double> state(run.d, gamma);
  for (const Observationd& ob : log) state.observe(ob.x, ob.w);

  BoundReport<double> rep;
  std::string kind_line;
  switch (bound) {
    case BoundKind::SubGaussian:
      rep = subgaussian_radius_sq(state, sub_params);
      kind_line = "subgaussian";
      break;
    case BoundKind::Bernstein:
      rep = try_bernstein_radius_sq(state, bern_params);
      kind_line = "bernstein";
      break;
    case BoundKind::UnregularizedSubGaussian:
      try {
        rep = unregularized_deviation_bound(state, sub_params);
      } catch (const NotPositiveDefinite&) {
        std::cout << "burn-in violated\n"
                  << "reason: V_t is singular after " << state.t()
                  << " observations; the unregularized bound needs a full-"
                     "rank design\n";
        return kExitBurnin;
      }
      kind_line = "unregularized_subgaussian";
      break;
    default:
      throw ConfigError("radius: unsupported bound kind");
  }

  if (!rep.radius_sq) {
    std::cout << "burn-in violated\n"
              << "data_ok: " << bool_text(rep.data_ok) << '\n'
              << "static_ok: " << bool_text(rep.static_ok) << '\n'
              << "data_margin: " << fmt_shortest(rep.data_margin) << '\n'
              << "static_margin: " << fmt_shortest(rep.static_margin) << '\n';
    return kExitBurnin;
  }

  std::ostringstream report;
  report << "bound: " << kind_line << '\n'
         << "dim: " << run.d << '\n'
         << "observations: " << state.t() << '\n'
         << "self_norm_sq: " << fmt_shortest(rep.self_norm_sq) << '\n'
         << "logdet_ratio: " << fmt_shortest(rep.logdet_ratio) << '\n';
  if (bound == BoundKind::Bernstein) {
    report << "alpha: " << fmt_shortest(rep.alpha) << '\n'
           << "leading_factor: " << fmt_shortest(rep.leading_factor) << '\n'
           << "data_margin: " << fmt_shortest(rep.data_margin) << '\n'
           << "static_margin: " << fmt_shortest(rep.static_margin) << '\n'
           << "delta_inflated: " << bool_text(rep.delta_inflated) << '\n';
  }
  report << "radius_sq: " << fmt_shortest(*rep.radius_sq) << '\n'
         << "radius: " << fmt_shortest(std::sqrt(*rep.radius_sq)) << '\n';

  std::cout << report.str();
  if (cfg.has("run.out_dir")) {
    OutputStage out{run.out_dir, {}};
    out.add("radius_report.txt", report.str());
    out.flush();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify: Monte Carlo checks of the library's probabilistic claims.
// ---------------------------------------------------------------------------

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::vector<std::string> falsified;  ///< named assertions that failed
  std::string csv;                     ///< one CSV file per suite
  json summary;                        ///< per-suite JSON fragment
};

SuiteResult run_identities(const Config& cfg, const RunParams& run) {
  SuiteResult res;
  res.name = "identities";
  const double tol = 1e-9;
  const std::int64_t n = run.trials;

  struct PerDim {
    std::int64_t n = 0;
    double max_completed = 0.0;
    double max_rearranged = 0.0;
  };
  std::map<Index, PerDim> per_dim;

  for (std::int64_t i = 0; i < n; ++i) {
    Index d = 1 + static_cast<Index>(i % 6);
    double scale = std::vector<double>{0.1, 1.0, 10.0}[(i / 6) % 3];
    Engine rng = make_engine(derive_seed(run.seed, 40000 + static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> normal(0.0, 1.0);

    SymMatrixd gamma = SymMatrixd::Scaled(d, 0.5 + static_cast<double>(i % 4));
    MartingaleState<double> with_gamma(d, gamma);
    MartingaleState<double> without(d, SymMatrixd::Zero(d));
    std::int64_t t = d + 2 + (i % 9);
    for (std::int64_t k = 0; k < t; ++k) {
      Vecd x(d);
      for (Index j = 0; j < d; ++j) x[j] = scale * normal(rng);
      double w = normal(rng);
      with_gamma.observe(x, w);
      without.observe(x, w);
    }
    Vecd lambda(d);
    for (Index j = 0; j < d; ++j) lambda[j] = 0.3 * normal(rng) / scale;

    double direct = martingale_exponent_direct(lambda, with_gamma);
    double completed = martingale_exponent_completed(lambda, with_gamma);
    double rearranged = martingale_exponent_completed(lambda, without);
    double denom = std::max(1.0, std::abs(direct));

    PerDim& pd = per_dim[d];
    ++pd.n;
    pd.max_completed =
        std::max(pd.max_completed, std::abs(completed - direct) / denom);
    pd.max_rearranged =
        std::max(pd.max_rearranged, std::abs(rearranged - direct) / denom);
  }

  std::ostringstream csv;
  csv << "d,n_instances,max_rel_err_completed,max_rel_err_rearranged,"
         "tolerance,pass\n";
  json rows = json::array();
  for (const auto& [d, pd] : per_dim) {
    bool ok = pd.max_completed <= tol && pd.max_rearranged <= tol;
    if (!ok) {
      res.falsified.push_back("identities: exponent identity at d = " +
                              std::to_string(d));
    }
    csv << d << ',' << pd.n << ',' << fmt_full(pd.max_completed) << ','
        << fmt_full(pd.max_rearranged) << ',' << fmt_full(tol) << ','
        << bool_text(ok) << '\n';
    rows.push_back({{"d", d},
                    {"n_instances", pd.n},
                    {"max_rel_err_completed", pd.max_completed},
                    {"max_rel_err_rearranged", pd.max_rearranged},
                    {"pass", ok}});
  }
  res.pass = res.falsified.empty();
  res.csv = csv.str();
  res.summary = {{"name", res.name}, {"pass", res.pass}, {"rows", rows}};
  return res;
}

SuiteResult run_second_moment(const Config& cfg, const RunParams& run) {
  SuiteResult res;
  res.name = "second_moment";
  const double threshold = 0.02;
  const std::int64_t n = cfg.get_int("verify.n_samples", 200000);
  std::vector<Index> dims = cfg.get_dims("verify.dims", "1,2,3,5");

  std::ostringstream csv;
  csv << "d,n_samples,rel_frobenius_error,threshold,pass\n";
  json rows = json::array();
  for (Index d : dims) {
    Engine rng = make_engine(derive_seed(run.seed, 7000 + static_cast<std::uint64_t>(d)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matd a(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) a(i, j) = normal(rng);
    SymMatrixd shape(Matd(a * a.transpose() + 0.5 * Matd::Identity(d, d)));

    double err = check_second_moment(shape, n,
                                     derive_seed(run.seed, 7100 + static_cast<std::uint64_t>(d)),
                                     run.threads);
    bool ok = err <= threshold;
    if (!ok) {
      res.falsified.push_back("second_moment: relative error at d = " +
                              std::to_string(d));
    }
    csv << d << ',' << n << ',' << fmt_full(err) << ',' << fmt_full(threshold)
        << ',' << bool_text(ok) << '\n';
    rows.push_back({{"d", d}, {"n_samples", n}, {"rel_frobenius_error", err},
                    {"pass", ok}});
  }
  res.pass = res.falsified.empty();
  res.csv = csv.str();
  res.summary = {{"name", res.name}, {"pass", res.pass}, {"rows", rows}};
  return res;
}

SuiteResult run_supermartingale(const Config& cfg, const RunParams& run) {
  SuiteResult res;
  res.name = "supermartingale";
  const std::int64_t n_paths = cfg.get_int("verify.n_paths", 20000);
  const std::int64_t m_lambda = cfg.get_int("verify.lambda_grid", 20);
  if (m_lambda < 1) {
    throw ConfigError("config key 'verify.lambda_grid': must be >= 1");
  }
  const double eps = cfg.get_double("bound.eps", 0.1);
  const double rule_threshold = cfg.get_double("verify.rule_threshold", 1.0);

  std::vector<NoiseModeld> noises = {NoiseModeld::rademacher_scaled(1.0),
                                     NoiseModeld::two_point(0.1, 1.0),
                                     NoiseModeld::uniform(1.0)};
  std::vector<std::int64_t> horizons = {10, 100};
  std::vector<RuleKind> rules = {RuleKind::FixedHorizon,
                                 RuleKind::LogdetRatioAtLeast};

  std::ostringstream csv;
  csv << "noise,t_max,rule,lambda_index,n_paths,mean,std_err,pass\n";
  json rows = json::array();
  std::uint64_t cell_index = 0;
  for (const NoiseModeld& noise : noises) {
    for (std::int64_t t_max : horizons) {
      for (RuleKind rule : rules) {
        TrialSpec<double> spec;
        spec.d = run.d;
        spec.noise = noise;
        spec.covariates = build_covariates(cfg, run.d);
        spec.gamma = cfg.get_matrix_at("bound.gamma", run.d, "identity:1");
        spec.rule = rule;
        spec.rule_threshold = rule_threshold;
        spec.t_max = t_max;
        spec.bound = BoundKind::None;
        spec.seed = derive_seed(run.seed, 50000 + cell_index);
        spec.validate();

        // Admissible grid: random directions at several fractions of the
        // domain boundary ||lambda||^2 weighted by B_W^2 B_X^2 = eps^2.
        Engine rng = make_engine(derive_seed(run.seed, 51000 + cell_index));
        std::normal_distribution<double> normal(0.0, 1.0);
        Matd b_x_sq = spec.covariates.b_x_sq().mat();
        double b_w = spec.noise.b_w();
        std::vector<Vecd> lambdas;
        const std::vector<double> fractions = {0.25, 0.5, 0.75, 0.95};
        for (std::int64_t k = 0; k < m_lambda; ++k) {
          Vecd u(run.d);
          for (Index j = 0; j < run.d; ++j) u[j] = normal(rng);
          double weighted = b_w * std::sqrt(u.dot(b_x_sq * u));
          double frac = fractions[static_cast<std::size_t>(k) % fractions.size()];
          lambdas.push_back(Vecd(frac * eps / weighted * u));
        }

        std::vector<MeanStdErr> cells = check_supermartingale_grid(
            lambdas, spec, eps, n_paths, run.threads);
        std::string rule_name = rule == RuleKind::FixedHorizon
                                    ? "fixed_horizon"
                                    : "logdet_ratio_at_least";
        for (std::size_t k = 0; k < cells.size(); ++k) {
          bool ok = cells[k].mean <= 1.0 + 3.0 * cells[k].std_err;
          if (!ok) {
            res.falsified.push_back(
                "supermartingale: mean > 1 + 3 std_err at noise " +
                noise.str() + ", t_max " + std::to_string(t_max) + ", rule " +
                rule_name + ", lambda " + std::to_string(k));
          }
          csv << noise.str() << ',' << t_max << ',' << rule_name << ',' << k
              << ',' << n_paths << ',' << fmt_full(cells[k].mean) << ','
              << fmt_full(cells[k].std_err) << ',' << bool_text(ok) << '\n';
        }
        rows.push_back({{"noise", noise.str()},
                        {"t_max", t_max},
                        {"rule", rule_name},
                        {"n_lambdas", cells.size()},
                        {"n_paths", n_paths}});
        ++cell_index;
      }
    }
  }
  res.pass = res.falsified.empty();
  res.csv = csv.str();
  res.summary = {{"name", res.name}, {"pass", res.pass}, {"cells", rows}};
  return res;
}

SuiteResult run_coverage(const Config& cfg, const RunParams& run) {
  SuiteResult res;
  res.name = "coverage";
  std::string bound_name = cfg.get_string("bound.kind", "subgaussian");
  BoundKind bound = parse_bound_kind(bound_name);
  std::int64_t t_max = cfg.get_int("verify.t_max", 300);
  TrialSpec<double> spec = build_trial_spec(cfg, run, bound, t_max);

  CoverageReport rep = coverage_experiment(spec, run.trials, run.threads);
  bool ok = rep.n_effective() > 0 &&
            rep.clopper_pearson_95.second <= spec.delta;
  if (rep.n_effective() == 0) {
    res.falsified.push_back(
        "coverage: no trial passed burn-in, nothing to certify");
  } else if (!ok) {
    res.falsified.push_back(
        "coverage: Clopper-Pearson upper bound " +
        fmt_shortest(rep.clopper_pearson_95.second) + " > delta " +
        fmt_shortest(spec.delta));
  }

  std::ostringstream csv;
  csv << "bound,delta,t_max,n_trials,n_violations,n_burnin_failures,"
         "failure_rate,ci_low,ci_high,pass\n";
  csv << bound_name << ',' << fmt_full(spec.delta) << ',' << t_max << ','
      << rep.n_trials << ',' << rep.n_violations << ','
      << rep.n_burnin_failures << ',' << fmt_full(rep.failure_rate) << ','
      << fmt_full(rep.clopper_pearson_95.first) << ','
      << fmt_full(rep.clopper_pearson_95.second) << ',' << bool_text(ok)
      << '\n';

  res.pass = res.falsified.empty();
  res.csv = csv.str();
  res.summary = {{"name", res.name},
                 {"pass", res.pass},
                 {"bound", bound_name},
                 {"delta", spec.delta},
                 {"n_trials", rep.n_trials},
                 {"n_violations", rep.n_violations},
                 {"n_burnin_failures", rep.n_burnin_failures},
                 {"failure_rate", rep.failure_rate},
                 {"ci_high", rep.clopper_pearson_95.second}};
  return res;
}

SuiteResult run_containment(const Config& cfg, const RunParams& run) {
  SuiteResult res;
  res.name = "containment";
  std::vector<Index> dims = cfg.get_dims("verify.dims", "1,2,3,5");
  std::int64_t per_dim = cfg.get_int("verify.instances_per_dim", 50);
  if (per_dim < 1) {
    throw ConfigError("config key 'verify.instances_per_dim': must be >= 1");
  }

  auto realized = generate_admitted_instances<double>(
      dims, per_dim, derive_seed(run.seed, 31));
  auto synthetic =
      synthetic_adversarial_instances<double>(dims, derive_seed(run.seed, 32));

  std::ostringstream csv;
  csv << "suite,n_instances,n_skipped_burnin,n_checked,n_contained,"
         "n_containment_failures,n_sufficient,n_sufficient_not_contained,"
         "pass\n";
  json rows = json::array();
  auto report_one = [&](const std::string& label,
                        const std::vector<ContainmentInstanced>& instances) {
    ContainmentReport rep = check_alpha_sufficiency(instances);
    bool ok = rep.ok() && rep.n_checked > 0;
    if (rep.n_containment_failures > 0) {
      res.falsified.push_back("containment: " + label +
                              " instance not contained");
    }
    if (rep.n_sufficient_not_contained > 0) {
      res.falsified.push_back("containment: " + label +
                              " scalar-sufficient instance not contained");
    }
    if (rep.n_checked == 0) {
      res.falsified.push_back("containment: " + label +
                              " produced no admitted instance");
    }
    csv << label << ',' << rep.n_instances << ',' << rep.n_skipped_burnin
        << ',' << rep.n_checked << ',' << rep.n_contained << ','
        << rep.n_containment_failures << ',' << rep.n_sufficient << ','
        << rep.n_sufficient_not_contained << ',' << bool_text(ok) << '\n';
    rows.push_back({{"suite", label},
                    {"n_instances", rep.n_instances},
                    {"n_checked", rep.n_checked},
                    {"n_containment_failures", rep.n_containment_failures},
                    {"n_sufficient", rep.n_sufficient},
                    {"n_sufficient_not_contained",
                     rep.n_sufficient_not_contained},
                    {"pass", ok}});
  };
  report_one("realized", realized);
  report_one("synthetic", synthetic);

  res.pass = res.falsified.empty();
  res.csv = csv.str();
  res.summary = {{"name", res.name}, {"pass", res.pass}, {"rows", rows}};
  return res;
}

int cmd_verify(const Config& cfg) {
  RunParams run = build_run(cfg);
  std::vector<std::string> wanted;
  for (const std::string& name :
       split(cfg.get_string("verify.suite", "all"), ',')) {
    if (name == "all") {
      wanted = {"identities", "second_moment", "supermartingale", "coverage",
                "containment"};
      break;
    }
    wanted.push_back(name);
  }

  std::vector<SuiteResult> results;
  for (const std::string& name : wanted) {
    if (name == "identities") {
      results.push_back(run_identities(cfg, run));
    } else if (name == "second_moment") {
      results.push_back(run_second_moment(cfg, run));
    } else if (name == "supermartingale") {
      results.push_back(run_supermartingale(cfg, run));
    } else if (name == "coverage") {
      results.push_back(run_coverage(cfg, run));
    } else if (name == "containment") {
      results.push_back(run_containment(cfg, run));
    } else {
      throw ConfigError(
          "config key 'verify.suite': expected identities, second_moment, "
          "supermartingale, coverage, containment or all, got '" +
          name + "'");
    }
  }

  json summary;
  summary["command"] = "verify";
  summary["seed"] = run.seed;
  json suites = json::array();
  json falsified = json::array();
  OutputStage out{run.out_dir, {}};
  bool all_pass = true;
  for (const SuiteResult& res : results) {
    suites.push_back(res.summary);
    out.add("verify_" + res.name + ".csv", res.csv);
    for (const std::string& f : res.falsified) falsified.push_back(f);
    all_pass = all_pass && res.pass;
  }
  summary["suites"] = suites;
  summary["falsified"] = falsified;
  summary["pass"] = all_pass;
  out.add("verify_summary.json", summary.dump(2) + "\n");
  out.flush();

  for (const SuiteResult& res : results) {
    if (res.pass) {
      std::cout << "suite " << res.name << ": ok\n";
    } else {
      std::cout << "suite " << res.name << ": FALSIFIED (" << res.falsified.front()
                << ")\n";
    }
  }
  if (!all_pass) {
    std::cout << "verify: FALSIFIED (" << falsified.size()
              << " assertion(s); see verify_summary.json)\n";
    return kExitFalsified;
  }
  std::cout << "verify: ok\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment: regret traces, ridge coverage tables, tightness tables.
// ---------------------------------------------------------------------------

RadiusProviderd build_provider(const Config& cfg, const RunParams& run,
                               const std::string& name,
                               const BanditEnvd& env) {
  SymMatrixd gamma = cfg.get_matrix_at("bound.gamma", run.d, "identity:1");
  double delta = cfg.get_double("bound.delta", 0.05);
  if (name == "subgaussian") {
    double sigma_sq =
        cfg.get_double("bound.sigma_subg_sq", env.noise.sigma_subg_sq());
    return RadiusProviderd::sub_gaussian(gamma, sigma_sq, delta);
  }
  if (name == "bernstein") {
    BernsteinParams<double> p;
    p.sigma_var_sq =
        cfg.get_double("bound.sigma_var_sq", env.noise.sigma_var_sq());
    p.b_w = cfg.get_double("bound.b_w", env.noise.b_w());
    p.b_x_sq = cfg.has("bound.b_x_sq")
                   ? cfg.get_matrix_at("bound.b_x_sq", run.d, "identity:1")
                   : SymMatrixd::Scaled(run.d, env.b_x_radius_sq());
    p.gamma = gamma;
    p.v = cfg.get_matrix_at("bound.v", run.d, "identity:16");
    p.eps = cfg.get_double("bound.eps", 0.1);
    p.nu = cfg.get_double("bound.nu", 0.1);
    p.delta = delta;
    return RadiusProviderd::bernstein(p);
  }
  if (name == "fixed") {
    return RadiusProviderd::fixed(gamma,
                                  cfg.get_double("experiment.fixed_radius", 1.0));
  }
  throw ConfigError(
      "config key 'experiment.provider': expected subgaussian, bernstein, "
      "fixed or both, got '" +
      name + "'");
}

int cmd_experiment(const Config& cfg) {
  RunParams run = build_run(cfg);
  std::string kind = cfg.get_string("experiment.kind", "regret");
  OutputStage out{run.out_dir, {}};
  json summary;
  summary["command"] = "experiment";
  summary["kind"] = kind;
  summary["seed"] = run.seed;

  if (kind == "regret") {
    BanditEnvd env;
    env.arms = cfg.get_rows("experiment.arms");
    env.theta_star = cfg.get_vec("experiment.theta_star");
    env.noise = build_noise(cfg);
    env.validate();
    if (env.dim() != run.d) {
      throw ConfigError(
          "config key 'experiment.theta_star': dimension differs from run.d");
    }
    std::int64_t horizon = cfg.get_int("experiment.horizon", 100);
    if (horizon < 1) {
      throw ConfigError("config key 'experiment.horizon': must be >= 1");
    }

    std::string provider_name = cfg.get_string("experiment.provider", "both");
    std::vector<std::string> providers;
    if (provider_name == "both") {
      providers = {"subgaussian", "bernstein"};
    } else {
      providers = {provider_name};
    }

    json traces = json::array();
    for (const std::string& name : providers) {
      RadiusProviderd provider = build_provider(cfg, run, name, env);
      RegretTrace trace = oful_run(env, provider, horizon, run.seed);
      std::ostringstream csv;
      write_regret_csv(csv, trace);
      out.add("regret_" + name + ".csv", csv.str());
      traces.push_back({{"provider", name},
                        {"steps", trace.steps.size()},
                        {"final_cum_regret", trace.final_cum_regret()},
                        {"delta_inflated", trace.delta_inflated}});
      std::cout << "experiment regret: provider " << name
                << " final cum regret "
                << fmt_shortest(trace.final_cum_regret()) << '\n';
    }
    summary["traces"] = traces;
  } else if (kind == "ridge_coverage") {
    std::int64_t horizon = cfg.get_int("experiment.horizon", 100);
    std::string bound_name = cfg.get_string("bound.kind", "subgaussian");
    BoundKind bound = parse_bound_kind(bound_name);
    if (bound == BoundKind::UnregularizedSubGaussian) {
      throw ConfigError(
          "config key 'bound.kind': ridge_coverage supports subgaussian or "
          "bernstein");
    }
    TrialSpec<double> spec = build_trial_spec(cfg, run, bound, horizon);
    Vecd theta_star = cfg.get_vec("experiment.theta_star");
    RidgeCoverageResult res =
        ridge_coverage(spec, theta_star, run.trials, run.threads);

    std::ostringstream csv;
    csv << "bound,n_trials,n_violations,n_burnin_failures,failure_rate,"
           "ci_low,ci_high,n_agreement_mismatch,max_error_identity_residual\n";
    csv << bound_name << ',' << res.report.n_trials << ','
        << res.report.n_violations << ',' << res.report.n_burnin_failures
        << ',' << fmt_full(res.report.failure_rate) << ','
        << fmt_full(res.report.clopper_pearson_95.first) << ','
        << fmt_full(res.report.clopper_pearson_95.second) << ','
        << res.n_agreement_mismatch << ','
        << fmt_full(res.max_error_identity_residual) << '\n';
    out.add("ridge_coverage.csv", csv.str());
    summary["bound"] = bound_name;
    summary["n_trials"] = res.report.n_trials;
    summary["n_violations"] = res.report.n_violations;
    summary["n_burnin_failures"] = res.report.n_burnin_failures;
    summary["failure_rate"] = res.report.failure_rate;
    summary["n_agreement_mismatch"] = res.n_agreement_mismatch;
    summary["max_error_identity_residual"] = res.max_error_identity_residual;
    std::cout << "experiment ridge_coverage: failure rate "
              << fmt_shortest(res.report.failure_rate) << " over "
              << res.report.n_effective() << " effective trials\n";
  } else if (kind == "tightness") {
    std::vector<TrialSpec<double>> cells;
    for (const std::string& part :
         split(cfg.get_string("experiment.t_grid", "200,2000"), ',')) {
      std::int64_t t = 0;
      if (!parse_int(part, t) || t < 0) {
        throw ConfigError(
            "config key 'experiment.t_grid': expected non-negative "
            "integers, got '" +
            part + "'");
      }
      cells.push_back(build_trial_spec(cfg, run, BoundKind::Bernstein, t));
    }
    std::vector<TightnessRow> rows =
        tightness_comparison(cells, run.trials, run.threads);

    std::ostringstream csv;
    csv << "noise,covariates,d,t_max,eps,nu,delta,n_trials,"
           "n_burnin_failures,burnin_failure_rate,"
           "mean_radius_sq_subgaussian,mean_radius_sq_bernstein,mean_ratio,"
           "mean_alpha\n";
    json jrows = json::array();
    for (const TightnessRow& row : rows) {
      csv << row.noise << ',' << row.covariates << ',' << row.d << ','
          << row.t_max << ',' << fmt_full(row.eps) << ',' << fmt_full(row.nu)
          << ',' << fmt_full(row.delta) << ',' << row.n_trials << ','
          << row.n_burnin_failures << ','
          << fmt_full(row.burnin_failure_rate) << ','
          << fmt_full(row.mean_radius_sq_subgaussian) << ','
          << fmt_full(row.mean_radius_sq_bernstein) << ','
          << fmt_full(row.mean_ratio) << ',' << fmt_full(row.mean_alpha)
          << '\n';
      jrows.push_back({{"t_max", row.t_max},
                       {"burnin_failure_rate", row.burnin_failure_rate},
                       {"mean_ratio", row.mean_ratio}});
      std::cout << "experiment tightness: t_max " << row.t_max
                << " mean radius_sq ratio " << fmt_shortest(row.mean_ratio)
                << '\n';
    }
    out.add("tightness.csv", csv.str());
    summary["rows"] = jrows;
  } else {
    throw ConfigError(
        "config key 'experiment.kind': expected regret, ridge_coverage or "
        "tightness, got '" +
        kind + "'");
  }

  out.add("experiment_summary.json", summary.dump(2) + "\n");
  out.flush();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-normalized martingale confidence radii"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::string out_dir;
    std::string suite;
    std::string bound;
    std::string log;
    std::int64_t seed = 0;
    std::int64_t trials = 0;
    std::int64_t threads = 0;
    std::vector<std::string> sets;
    CLI::App* sub = nullptr;
  };
  std::vector<std::string> names = {"radius", "verify", "experiment"};
  std::vector<Flags> flags(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    CLI::App* sub = app.add_subcommand(
        names[i], names[i] == "radius"
                      ? "replay an observation log and print the bound"
                      : names[i] == "verify"
                            ? "run Monte Carlo verification suites"
                            : "run regret / coverage / tightness experiments");
    Flags& f = flags[i];
    f.sub = sub;
    sub->add_option("--config", f.config, "config file (INI-style sections)");
    sub->add_option("--seed", f.seed, "master seed (overrides run.seed)");
    sub->add_option("--out-dir", f.out_dir, "output directory");
    sub->add_option("--trials", f.trials, "trial count (overrides run.trials)");
    sub->add_option("--threads", f.threads, "worker count (overrides run.threads)");
    sub->add_option("--suite", f.suite, "verify suites, comma separated");
    sub->add_option("--bound", f.bound, "bound kind (overrides bound.kind)");
    sub->add_option("--log", f.log, "observation log (overrides radius.log)");
    sub->add_option("--set", f.sets, "generic override section.key=value");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    for (std::size_t i = 0; i < names.size(); ++i) {
      const Flags& f = flags[i];
      if (!f.sub->parsed()) continue;

      Config cfg;
      if (!f.config.empty()) cfg.load_file(f.config);
      for (const std::string& spec : f.sets) cfg.set_from_spec(spec);
      if (f.sub->count("--seed")) cfg.set("run.seed", std::to_string(f.seed));
      if (f.sub->count("--trials")) cfg.set("run.trials", std::to_string(f.trials));
      if (f.sub->count("--threads")) cfg.set("run.threads", std::to_string(f.threads));
      if (!f.out_dir.empty()) cfg.set("run.out_dir", f.out_dir);
      if (!f.suite.empty()) cfg.set("verify.suite", f.suite);
      if (!f.bound.empty()) cfg.set("bound.kind", f.bound);
      if (!f.log.empty()) cfg.set("radius.log", f.log);

      if (names[i] == "radius") return cmd_radius(cfg);
      if (names[i] == "verify") return cmd_verify(cfg);
      return cmd_experiment(cfg);
    }
    return kExitConfig;  // unreachable: a subcommand is required
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}
