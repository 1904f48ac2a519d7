#pragma once

// Batch experiments: INI-style configuration, sweep expansion, parallel
// trials with a deterministic merge, results.csv and SVG plots.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "uampmf/applications.hpp"
#include "uampmf/uamp.hpp"

namespace uampmf {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line, std::string field)
      : std::runtime_error(format(what, line, field)), line_(line), field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(const std::string& what, int line, const std::string& field) {
    std::string s = "config";
    if (line > 0) s += ":" + std::to_string(line);
    if (!field.empty()) s += ": " + field;
    return s + ": " + what;
  }
  int line_;
  std::string field_;
};

inline const std::vector<std::string>& application_names() {
  static const std::vector<std::string> names{"rpca", "dl", "csmu", "nmf", "sparse_mf", "sparse_nmf", "uamp"};
  return names;
}

/// Generator and model parameters for one sweep point.
struct DataParams {
  Index m = 40, n = 10, l = 40;
  double snr_db = 50.0;
  double rho = 0.0;
  double delta = 0.1;
  std::optional<Index> k;  // nonzeros per column; default round(0.2 n)
  double nu = 0.01;
  double theta = 0.0, phi = 1.0;
  bool common_support = false;
  double outlier_lo = -10.0, outlier_hi = 10.0;
  double shape = 0.0, scale = 0.0;

  Index per_column() const {
    return k ? *k : static_cast<Index>(std::lround(0.2 * static_cast<double>(n)));
  }
};

struct SweepAxis {
  std::string name;
  std::vector<double> values;
  int line = 0;
};

struct ExperimentConfig {
  std::string application;
  int trials = 1;
  std::uint64_t seed = 1;
  std::string out = "results";
  bool timing = false;
  DataParams data;
  SolverOptions solver;
  std::string schedule = "default";
  std::vector<SweepAxis> axes;
  std::map<std::string, int> lines;  // "section.key" -> source line

  int line_of(const std::string& key) const {
    auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  }
};

inline const std::vector<std::string>& sweep_names() {
  static const std::vector<std::string> names{"snr_db", "rho", "n", "l", "delta", "m", "k", "nu"};
  return names;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& v, int line, const std::string& field) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("expected a number, got '" + v + "'", line, field);
  return out;
}

inline long long parse_int(const std::string& v, int line, const std::string& field) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("expected an integer, got '" + v + "'", line, field);
  return out;
}

inline bool parse_bool(const std::string& v, int line, const std::string& field) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'", line, field);
}

inline SweepAxis parse_axis(const std::string& v, int line, const std::string& field) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) throw ConfigError("expected 'name: v1, v2, ...'", line, field);
  SweepAxis axis{trim(std::string_view(v).substr(0, colon)), {}, line};
  const auto& names = sweep_names();
  if (std::find(names.begin(), names.end(), axis.name) == names.end())
    throw ConfigError("unknown sweep variable '" + axis.name + "'", line, field);
  std::stringstream ss(v.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) axis.values.push_back(parse_double(trim(item), line, field));
  if (axis.values.empty()) throw ConfigError("sweep axis has no values", line, field);
  return axis;
}

inline void set_key(ExperimentConfig& c, const std::string& section, const std::string& key,
                    const std::string& v, int line) {
  const std::string field = section + "." + key;
  auto num = [&] { return parse_double(v, line, field); };
  auto integer = [&] { return parse_int(v, line, field); };
  auto flag = [&] { return parse_bool(v, line, field); };
  auto positive = [&] {
    const long long x = integer();
    if (x < 1) throw ConfigError("must be a positive integer", line, field);
    return static_cast<Index>(x);
  };
  DataParams& d = c.data;
  SolverOptions& s = c.solver;
  if (section == "experiment") {
    if (key == "application") {
      const auto& names = application_names();
      if (std::find(names.begin(), names.end(), v) == names.end())
        throw ConfigError("unknown application '" + v + "'", line, field);
      c.application = v;
    } else if (key == "trials") c.trials = static_cast<int>(positive());
    else if (key == "seed") {
      const long long x = integer();
      if (x < 0) throw ConfigError("seed must be non-negative", line, field);
      c.seed = static_cast<std::uint64_t>(x);
    } else if (key == "out") c.out = v;
    else if (key == "timing") c.timing = flag();
    else throw ConfigError("unknown key", line, field);
  } else if (section == "data") {
    if (key == "m") d.m = positive();
    else if (key == "n") d.n = positive();
    else if (key == "l") d.l = positive();
    else if (key == "snr_db") d.snr_db = num();
    else if (key == "rho") d.rho = num();
    else if (key == "delta") d.delta = num();
    else if (key == "k") {
      const long long x = integer();
      if (x < 0) throw ConfigError("must be non-negative", line, field);
      d.k = static_cast<Index>(x);
    } else if (key == "nu") d.nu = num();
    else if (key == "theta") d.theta = num();
    else if (key == "phi") d.phi = num();
    else if (key == "common_support") d.common_support = flag();
    else if (key == "outlier_lo") d.outlier_lo = num();
    else if (key == "outlier_hi") d.outlier_hi = num();
    else if (key == "shape") d.shape = num();
    else if (key == "scale") d.scale = num();
    else throw ConfigError("unknown key", line, field);
  } else if (section == "solver") {
    if (key == "tol") s.tol = num();
    else if (key == "max_iters") s.max_iters = static_cast<int>(positive());
    else if (key == "restarts") {
      const long long x = integer();
      if (x < 0) throw ConfigError("must be non-negative", line, field);
      s.restarts = static_cast<int>(x);
    } else if (key == "schedule") {
      if (v != "default" && v != "listing") throw ConfigError("expected default or listing", line, field);
      c.schedule = v;
    } else if (key == "inner_iters") s.inner_iters = static_cast<int>(positive());
    else if (key == "inner_tol") s.inner_tol = num();
    else throw ConfigError("unknown key", line, field);
  } else if (section == "sweep") {
    if (key != "axis1" && key != "axis2") throw ConfigError("expected axis1 or axis2", line, field);
    SweepAxis axis = parse_axis(v, line, field);
    const std::size_t slot = key == "axis1" ? 0 : 1;
    if (c.axes.size() <= slot) c.axes.resize(slot + 1);
    c.axes[slot] = std::move(axis);
  } else {
    throw ConfigError("unknown section '" + section + "'", line, "");
  }
  c.lines[field] = line;
}

}  // namespace detail

/// Checks one sweep point; `line` and `field` locate the offending entry.
inline void validate_point(const ExperimentConfig& c, const DataParams& d) {
  auto fail = [&](const std::string& what, const std::string& key) {
    // Prefer the sweep line when the value came from an axis.
    int line = c.line_of("data." + key);
    std::string field = "data." + key;
    for (std::size_t i = 0; i < c.axes.size(); ++i)
      if (c.axes[i].name == key) {
        line = c.axes[i].line;
        field = "sweep.axis" + std::to_string(i + 1);
      }
    throw ConfigError(what, line, field);
  };
  const std::string& app = c.application;
  if (d.m < 1) fail("must be a positive integer", "m");
  if (d.n < 1) fail("must be a positive integer", "n");
  if (d.l < 1) fail("must be a positive integer", "l");
  if (std::isnan(d.snr_db)) fail("must be a number or inf", "snr_db");
  if (!(d.rho >= 0.0 && d.rho <= 1.0)) fail("must lie in [0, 1]", "rho");
  if (!(d.delta >= 0.0 && d.delta <= 1.0)) fail("must lie in [0, 1]", "delta");
  if (app == "sparse_nmf" && !(d.delta > 0.0 && d.delta < 1.0))
    fail("sparse_nmf needs a rate strictly inside (0, 1)", "delta");
  if (d.per_column() > d.n) fail("k exceeds n", "k");
  if (!(d.nu >= 0.0)) fail("must be non-negative", "nu");
  if (!(d.phi > 0.0)) fail("must be positive", "phi");
  if (!(d.outlier_lo < d.outlier_hi)) fail("outlier_lo must be below outlier_hi", "outlier_lo");
  if (d.shape < 0.0 || d.scale < 0.0) fail("must be non-negative", d.shape < 0.0 ? "shape" : "scale");
  if (app == "rpca" && d.n + d.m > RpcaSpec{}.max_inner) fail("rank + m is too large", "n");
}

inline void validate(const ExperimentConfig& c);

/// Parses configuration text. Sections [full.<name>] are applied on top of
/// <name> only when `full` is set.
inline ExperimentConfig parse_config(const std::string& text, bool full = false) {
  ExperimentConfig c;
  std::vector<std::tuple<std::string, std::string, std::string, int>> deferred;
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string s = detail::trim(std::string_view(raw).substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header", line, "");
      section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line, section);
    if (section.empty()) throw ConfigError("key outside of a section", line, "");
    const std::string key = detail::trim(std::string_view(s).substr(0, eq));
    const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
    if (section.rfind("full.", 0) == 0) {
      deferred.emplace_back(section.substr(5), key, value, line);
      continue;
    }
    detail::set_key(c, section, key, value, line);
  }
  // Overrides are always parsed so that errors surface without --full.
  ExperimentConfig scratch = c;
  for (const auto& [sec, key, value, ln] : deferred) detail::set_key(full ? c : scratch, sec, key, value, ln);
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path, bool full = false) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), full);
}

/// Expands the sweep: one DataParams per grid point, axis1 outermost.
struct SweepPoint {
  DataParams data;
  std::vector<double> coords;
};

inline void apply_axis(DataParams& d, const std::string& name, double v) {
  auto as_index = [&] { return static_cast<Index>(std::llround(v)); };
  if (name == "snr_db") d.snr_db = v;
  else if (name == "rho") d.rho = v;
  else if (name == "n") d.n = as_index();
  else if (name == "l") d.l = as_index();
  else if (name == "delta") d.delta = v;
  else if (name == "m") d.m = as_index();
  else if (name == "k") d.k = as_index();
  else if (name == "nu") d.nu = v;
}

inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& c) {
  std::vector<SweepPoint> pts{{c.data, {}}};
  for (const SweepAxis& axis : c.axes) {
    std::vector<SweepPoint> next;
    for (const SweepPoint& p : pts)
      for (double v : axis.values) {
        SweepPoint q = p;
        apply_axis(q.data, axis.name, v);
        q.coords.push_back(v);
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  return pts;
}

inline void validate(const ExperimentConfig& c) {
  if (c.application.empty()) throw ConfigError("missing application", 0, "experiment.application");
  if (c.axes.size() > 2) throw ConfigError("at most two sweep axes", 0, "sweep");
  for (std::size_t i = 0; i < c.axes.size(); ++i)
    if (c.axes[i].name.empty())
      throw ConfigError("axis2 given without axis1", c.axes.back().line, "sweep.axis" + std::to_string(i + 1));
  if (c.axes.size() == 2 && c.axes[0].name == c.axes[1].name)
    throw ConfigError("both axes sweep '" + c.axes[0].name + "'", c.axes[1].line, "sweep.axis2");
  if (!(c.solver.tol > 0.0)) throw ConfigError("must be positive", c.line_of("solver.tol"), "solver.tol");
  if (!(c.solver.inner_tol >= 0.0))
    throw ConfigError("must be non-negative", c.line_of("solver.inner_tol"), "solver.inner_tol");
  for (const SweepPoint& p : sweep_points(c)) validate_point(c, p.data);
}

/// Effective configuration as parseable text.
inline std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream os;
  auto num = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  const DataParams& d = c.data;
  const SolverOptions& s = c.solver;
  os << "[experiment]\napplication = " << c.application << "\ntrials = " << c.trials
     << "\nseed = " << c.seed << "\nout = " << c.out << "\ntiming = " << (c.timing ? "true" : "false")
     << "\n\n[data]\nm = " << d.m << "\nn = " << d.n << "\nl = " << d.l << "\nsnr_db = " << num(d.snr_db)
     << "\nrho = " << num(d.rho) << "\ndelta = " << num(d.delta);
  if (d.k) os << "\nk = " << *d.k;
  os << "\nnu = " << num(d.nu) << "\ntheta = " << num(d.theta) << "\nphi = " << num(d.phi)
     << "\ncommon_support = " << (d.common_support ? "true" : "false")
     << "\noutlier_lo = " << num(d.outlier_lo) << "\noutlier_hi = " << num(d.outlier_hi)
     << "\nshape = " << num(d.shape) << "\nscale = " << num(d.scale) << "\n\n[solver]\ntol = " << num(s.tol)
     << "\nmax_iters = " << s.max_iters << "\nrestarts = " << s.restarts << "\nschedule = " << c.schedule
     << "\ninner_iters = " << s.inner_iters << "\ninner_tol = " << num(s.inner_tol) << "\n";
  if (!c.axes.empty()) {
    os << "\n[sweep]\n";
    for (std::size_t i = 0; i < c.axes.size(); ++i) {
      os << "axis" << i + 1 << " = " << c.axes[i].name << ":";
      for (std::size_t j = 0; j < c.axes[i].values.size(); ++j)
        os << (j ? ", " : " ") << num(c.axes[i].values[j]);
      os << "\n";
    }
  }
  return os.str();
}

/// Solver options for a config: the listing schedule replaces the inner
/// loop settings.
inline SolverOptions effective_solver(const ExperimentConfig& c) {
  SolverOptions s = c.solver;
  if (c.schedule == "listing") {
    const SolverOptions l = SolverOptions::listing();
    s.inner_iters = l.inner_iters;
    s.reset_dual = l.reset_dual;
    s.belief = l.belief;
  }
  return s;
}

inline ApplicationSpec application_spec(const std::string& app, const DataParams& d) {
  if (app == "rpca") {
    RpcaSpec s;
    s.m = d.m, s.l = d.l, s.rank = d.n, s.outlier_rate = d.delta, s.rho = d.rho;
    s.outlier_lo = d.outlier_lo, s.outlier_hi = d.outlier_hi, s.shape = d.shape, s.scale = d.scale;
    return s;
  }
  if (app == "dl") return DlSpec{d.m, d.n, d.l, d.per_column(), d.rho, d.shape, d.scale};
  if (app == "csmu")
    return CsmuSpec{d.m, d.n, d.l, d.per_column(), d.nu, d.common_support, d.rho, d.shape, d.scale};
  if (app == "nmf") return NmfSpec{d.m, d.n, d.l, d.theta, d.phi};
  if (app == "sparse_mf") return SparseMfSpec{d.m, d.n, d.l, d.delta, d.shape, d.scale};
  if (app == "sparse_nmf") return SparseNmfSpec{d.m, d.n, d.l, d.delta, d.theta, d.phi};
  throw std::invalid_argument("no factorization spec for application '" + app + "'");
}

inline std::string metric_name(const std::string& app) {
  if (app == "dl" || app == "sparse_mf") return "NMSE_H";
  if (app == "csmu" || app == "uamp") return "NMSE_X";
  return "NMSE_Z";
}

struct ResultRow {
  std::string application;
  std::string axis1, axis2;
  std::uint64_t seed = 0;
  std::string metric;
  double value_db = 0.0;
  int iters = 0;
  double wall_s = 0.0;
  bool converged = false;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t base, std::size_t point, int trial) {
  return splitmix64(splitmix64(base) ^ splitmix64((static_cast<std::uint64_t>(point) << 32) |
                                                  static_cast<std::uint32_t>(trial)));
}

/// Standalone UAMP trial: y_l = A x_l + w_l with a correlated A and
/// k-sparse columns, solved column by column with the noise precision known.
struct UampTrial {
  Matrix a, x, y, x_hat;
  double noise_var = 0.0;
  int iters = 0;
  bool converged = true;
};

inline UampTrial run_uamp_trial(const DataParams& d, Rng& rng, const UampOptions& opts = {}) {
  UampTrial t;
  t.a = gen_correlated(d.m, d.n, d.rho, rng);
  t.x = gen_sparse(d.n, d.l, static_cast<double>(d.per_column()), SparsityMode::kPerColumnCount, rng);
  NoisyObservation obs = add_noise(t.a * t.x, d.snr_db, rng);
  t.y = std::move(obs.y);
  t.noise_var = obs.noise_var;
  const double beta = t.noise_var > 0.0 ? 1.0 / t.noise_var : 1e12;
  t.x_hat.resize(d.n, d.l);
  for (Index j = 0; j < d.l; ++j) {
    GaussianGammaPrior g;
    g.shape = d.shape;
    g.scale = d.scale;
    const UampResult r = uamp_solve(t.y.col(j), t.a, beta, g, opts);
    t.x_hat.col(j) = r.x;
    t.iters = std::max(t.iters, r.iterations);
    t.converged = t.converged && r.converged && !r.diverged;
  }
  return t;
}

/// Runs one trial. Any failure yields the zero-estimate value (0 dB) with
/// converged = false.
inline ResultRow run_trial(const ExperimentConfig& c, const DataParams& d, std::uint64_t seed) {
  ResultRow row;
  row.application = c.application;
  row.seed = seed;
  row.metric = metric_name(c.application);
  const auto start = std::chrono::steady_clock::now();
  try {
    Rng rng(seed);
    double value = 0.0;
    if (c.application == "uamp") {
      UampOptions o;
      o.max_iters = c.solver.max_iters;
      const UampTrial t = run_uamp_trial(d, rng, o);
      value = nmse_x(t.x, t.x_hat);
      row.iters = t.iters;
      row.converged = t.converged;
    } else {
      const ApplicationSpec spec = application_spec(c.application, d);
      const Instance inst = make_instance(spec, d.snr_db, rng);
      FactorizationProblem p = build_problem(spec, inst);
      p.options = effective_solver(c);
      p.options.seed = seed;
      const SolveResult r = solve(p);
      if (c.application == "rpca") value = nmse_db(inst.z, rpca_low_rank(r, d.n));
      else if (row.metric == "NMSE_H") value = nmse_h_resolved(inst.h, r.h);
      else if (row.metric == "NMSE_X") value = nmse_x(inst.x, r.x);
      else value = nmse_z(inst.z, r.h, r.x);
      row.iters = r.iterations;
      row.converged = r.converged && !r.diverged;
    }
    if (!std::isfinite(value)) throw NumericError("non-finite metric");
    row.value_db = value;
  } catch (const std::exception&) {
    row.value_db = 0.0;
    row.iters = 0;
    row.converged = false;
  }
  if (c.timing)
    row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

inline std::string format_coord(double v) {
  if (std::isinf(v)) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Worker count from UAMPMF_THREADS; 0 or unset means hardware concurrency.
inline unsigned worker_count() {
  unsigned n = 0;
  if (const char* env = std::getenv("UAMPMF_THREADS")) n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

inline std::vector<ResultRow> run_trials(const ExperimentConfig& c) {
  const std::vector<SweepPoint> pts = sweep_points(c);
  const std::size_t total = pts.size() * static_cast<std::size_t>(c.trials);
  std::vector<ResultRow> rows(total);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < total;) {
      const std::size_t p = i / static_cast<std::size_t>(c.trials);
      const int t = static_cast<int>(i % static_cast<std::size_t>(c.trials));
      ResultRow row = run_trial(c, pts[p].data, trial_seed(c.seed, p, t));
      if (!pts[p].coords.empty()) row.axis1 = format_coord(pts[p].coords[0]);
      if (pts[p].coords.size() > 1) row.axis2 = format_coord(pts[p].coords[1]);
      rows[i] = std::move(row);
    }
  };
  const unsigned workers = std::min<std::size_t>(worker_count(), total);
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return rows;
}

inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "application,axis1,axis2,seed,metric,value_db,iters,wall_s,converged\n";
  char buf[64];
  for (const ResultRow& r : rows) {
    os << r.application << ',' << r.axis1 << ',' << r.axis2 << ',' << r.seed << ',' << r.metric << ',';
    std::snprintf(buf, sizeof buf, "%.6f", r.value_db);
    os << buf << ',' << r.iters << ',';
    std::snprintf(buf, sizeof buf, "%.6f", r.wall_s);
    os << buf << ',' << (r.converged ? "true" : "false") << '\n';
  }
}

// ---------------------------------------------------------------------------
// SVG plots

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

/// Median value per point: a line plot over axis1 (a single marker without
/// axes), or a heat-grid over (axis1, axis2).
inline std::string plot_svg(const ExperimentConfig& c, const std::vector<ResultRow>& rows,
                            const std::string& metric) {
  using detail::svg_num;
  const std::vector<SweepPoint> pts = sweep_points(c);
  std::vector<double> med(pts.size());
  for (std::size_t p = 0; p < pts.size(); ++p) {
    std::vector<double> vals;
    for (int t = 0; t < c.trials; ++t) {
      const ResultRow& r = rows[p * static_cast<std::size_t>(c.trials) + static_cast<std::size_t>(t)];
      if (r.metric == metric) vals.push_back(r.value_db);
    }
    med[p] = detail::median(vals);
  }
  const double lo = *std::min_element(med.begin(), med.end());
  const double hi = *std::max_element(med.begin(), med.end());
  const double span = hi > lo ? hi - lo : 1.0;
  std::ostringstream os;
  const std::string title = c.application + " " + metric + " (dB, median of " + std::to_string(c.trials) + ")";

  if (c.axes.size() == 2) {
    const std::size_t rows_n = c.axes[0].values.size(), cols_n = c.axes[1].values.size();
    const double cw = 70, ch = 40, x0 = 90, y0 = 50;
    const double width = x0 + cw * static_cast<double>(cols_n) + 20;
    const double height = y0 + ch * static_cast<double>(rows_n) + 50;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(width) << "\" height=\""
       << svg_num(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<text x=\"10\" y=\"20\">" << title << "</text>\n";
    for (std::size_t i = 0; i < rows_n; ++i) {
      os << "<text x=\"10\" y=\"" << svg_num(y0 + ch * (static_cast<double>(i) + 0.6)) << "\">"
         << c.axes[0].name << "=" << format_coord(c.axes[0].values[i]) << "</text>\n";
      for (std::size_t j = 0; j < cols_n; ++j) {
        const double v = med[i * cols_n + j];
        // Low (good) values are blue, high values red.
        const double u = std::isfinite(v) ? (v - lo) / span : 0.5;
        const int red = static_cast<int>(std::lround(255 * u)), blue = 255 - red;
        const double x = x0 + cw * static_cast<double>(j), y = y0 + ch * static_cast<double>(i);
        os << "<rect x=\"" << svg_num(x) << "\" y=\"" << svg_num(y) << "\" width=\"" << svg_num(cw)
           << "\" height=\"" << svg_num(ch) << "\" fill=\"rgb(" << red << ",80," << blue
           << ")\" stroke=\"white\"/>\n";
        os << "<text x=\"" << svg_num(x + 8) << "\" y=\"" << svg_num(y + ch * 0.6)
           << "\" fill=\"white\">" << (std::isfinite(v) ? svg_num(v) : "nan") << "</text>\n";
      }
    }
    for (std::size_t j = 0; j < cols_n; ++j)
      os << "<text x=\"" << svg_num(x0 + cw * static_cast<double>(j) + 8) << "\" y=\""
         << svg_num(y0 + ch * static_cast<double>(rows_n) + 20) << "\">" << c.axes[1].name << "="
         << format_coord(c.axes[1].values[j]) << "</text>\n";
    os << "</svg>\n";
    return os.str();
  }

  const double w = 480, h = 320, left = 60, right = 20, top = 40, bottom = 50;
  std::vector<double> xs;
  if (c.axes.empty()) xs.push_back(0.0);
  else xs = c.axes[0].values;
  double xlo = *std::min_element(xs.begin(), xs.end()), xhi = *std::max_element(xs.begin(), xs.end());
  if (!(xhi > xlo)) xlo -= 1.0, xhi += 1.0;
  auto px = [&](double x) { return left + (x - xlo) / (xhi - xlo) * (w - left - right); };
  auto py = [&](double y) { return top + (hi - y) / span * (h - top - bottom); };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(w) << "\" height=\"" << svg_num(h)
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"10\" y=\"20\">" << title << "</text>\n";
  os << "<line x1=\"" << svg_num(left) << "\" y1=\"" << svg_num(h - bottom) << "\" x2=\"" << svg_num(w - right)
     << "\" y2=\"" << svg_num(h - bottom) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << svg_num(left) << "\" y1=\"" << svg_num(top) << "\" x2=\"" << svg_num(left)
     << "\" y2=\"" << svg_num(h - bottom) << "\" stroke=\"black\"/>\n";
  os << "<text x=\"5\" y=\"" << svg_num(top + 4) << "\">" << svg_num(hi) << "</text>\n";
  os << "<text x=\"5\" y=\"" << svg_num(h - bottom) << "\">" << svg_num(lo) << "</text>\n";
  os << "<text x=\"" << svg_num(w / 2) << "\" y=\"" << svg_num(h - 10) << "\">"
     << (c.axes.empty() ? std::string("single point") : c.axes[0].name) << "</text>\n";
  std::string path;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(med[i])) continue;
    path += (path.empty() ? "M" : " L") + svg_num(px(xs[i])) + " " + svg_num(py(med[i]));
    os << "<circle cx=\"" << svg_num(px(xs[i])) << "\" cy=\"" << svg_num(py(med[i]))
       << "\" r=\"3\" fill=\"navy\"/>\n";
    os << "<text x=\"" << svg_num(px(xs[i]) - 10) << "\" y=\"" << svg_num(h - bottom + 15) << "\">"
       << format_coord(xs[i]) << "</text>\n";
  }
  if (!path.empty()) os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"navy\"/>\n";
  os << "</svg>\n";
  return os.str();
}

/// Runs every trial and, when `c.out` is non-empty, writes results.csv,
/// config.echo and one plot per metric into it.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& c) {
  validate(c);
  std::vector<ResultRow> rows = run_trials(c);
  if (c.out.empty()) return rows;
  namespace fs = std::filesystem;
  fs::create_directories(c.out);
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(fs::path(c.out) / name, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot write " + (fs::path(c.out) / name).string());
    f << body;
  };
  std::ostringstream csv;
  write_results_csv(csv, rows);
  write("results.csv", csv.str());
  write("config.echo", to_ini(c));
  const std::string metric = metric_name(c.application);
  write("plot_" + metric + ".svg", plot_svg(c, rows, metric));
  return rows;
}

}  // namespace uampmf
