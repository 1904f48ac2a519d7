#pragma once

// Command-line front end.
//
//   uampmf run <config>       batch experiment -> results.csv, config.echo, plots
//   uampmf uamp <config>      standalone linear-model solve
//   uampmf oracle <suite>     denoisers | messages | metrics | all
//   uampmf version
//
// Exit codes: 0 success, 1 runtime failure or failed oracle, 2 usage or
// configuration error.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "uampmf/experiment.hpp"
#include "uampmf/matrix_io.hpp"
#include "uampmf/oracle/suites.hpp"
#include "uampmf/version.hpp"

namespace uampmf {

struct CliFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
  bool timing = false;
  bool full = false;
};

/// Settings of the `uamp` subcommand. Without a_file the problem is drawn
/// from the [data] section.
struct UampJob {
  std::optional<std::string> a_file, y_file;
  std::optional<double> beta;
  std::string prior = "sbl";
  std::string out = "uamp_out";
  std::uint64_t seed = 1;
  UampOptions options;
  DataParams data;
};

inline UampJob parse_uamp_job(const std::string& text) {
  UampJob job;
  ExperimentConfig scratch;
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string s = detail::trim(std::string_view(raw).substr(0, raw.find_first_of("#;")));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header", line, "");
      section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line, section);
    const std::string key = detail::trim(std::string_view(s).substr(0, eq));
    const std::string v = detail::trim(std::string_view(s).substr(eq + 1));
    const std::string field = section + "." + key;
    if (section == "data") {
      detail::set_key(scratch, section, key, v, line);
    } else if (section == "uamp") {
      if (key == "a_file") job.a_file = v;
      else if (key == "y_file") job.y_file = v;
      else if (key == "beta") {
        job.beta = detail::parse_double(v, line, field);
        if (!(*job.beta > 0.0)) throw ConfigError("must be positive", line, field);
      } else if (key == "prior") {
        if (v != "sbl" && v != "gaussian" && v != "nonneg")
          throw ConfigError("expected sbl, gaussian or nonneg", line, field);
        job.prior = v;
      } else if (key == "out") job.out = v;
      else if (key == "seed") job.seed = static_cast<std::uint64_t>(detail::parse_int(v, line, field));
      else if (key == "max_iters") job.options.max_iters = static_cast<int>(detail::parse_int(v, line, field));
      else if (key == "tol") job.options.tol = detail::parse_double(v, line, field);
      else if (key == "variant") {
        if (v != "v1" && v != "v2") throw ConfigError("expected v1 or v2", line, field);
        job.options.variant = v == "v1" ? UampVariant::kV1 : UampVariant::kV2;
      } else throw ConfigError("unknown key", line, field);
    } else {
      throw ConfigError("unknown section '" + section + "'", line, "");
    }
  }
  job.data = scratch.data;
  if (job.a_file.has_value() != job.y_file.has_value())
    throw ConfigError("a_file and y_file go together", 0, "uamp");
  if (job.a_file && !job.beta) throw ConfigError("beta is required with file input", 0, "uamp.beta");
  return job;
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Denoiser uamp_prior(const std::string& name) {
  if (name == "gaussian") return GaussianPrior{0.0, 1.0, true};
  if (name == "nonneg") return NonNegativeGaussianPrior{0.0, 1.0};
  return GaussianGammaPrior{};
}

inline int run_command(const std::string& path, const CliFlags& flags) {
  ExperimentConfig cfg = load_config(path, flags.full);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out) cfg.out = *flags.out;
  if (flags.timing) cfg.timing = true;
  const std::vector<ResultRow> rows = run_experiment(cfg);
  if (!flags.quiet) {
    int failed = 0;
    for (const ResultRow& r : rows) failed += r.converged ? 0 : 1;
    std::cout << cfg.application << ": " << rows.size() << " rows, " << failed
              << " not converged, written to " << cfg.out << "/results.csv\n";
  }
  return 0;
}

inline int uamp_command(const std::string& path, const CliFlags& flags) {
  UampJob job = parse_uamp_job(read_file(path));
  if (flags.seed) job.seed = *flags.seed;
  if (flags.out) job.out = *flags.out;
  Matrix x_hat;
  std::optional<double> nmse;
  int iters = 0;
  bool converged = true;
  if (job.a_file) {
    const Matrix a = load_matrix(*job.a_file);
    const Matrix y = load_matrix(*job.y_file);
    if (y.rows() != a.rows()) throw DimensionError("y has " + std::to_string(y.rows()) + " rows, A has " + std::to_string(a.rows()));
    x_hat.resize(a.cols(), y.cols());
    for (Index j = 0; j < y.cols(); ++j) {
      const UampResult r = uamp_solve(y.col(j), a, *job.beta, uamp_prior(job.prior), job.options);
      x_hat.col(j) = r.x;
      iters = std::max(iters, r.iterations);
      converged = converged && r.converged && !r.diverged;
    }
  } else {
    Rng rng(job.seed);
    const UampTrial t = run_uamp_trial(job.data, rng, job.options);
    x_hat = t.x_hat;
    iters = t.iters;
    converged = t.converged;
    nmse = nmse_x(t.x, t.x_hat);
  }
  std::filesystem::create_directories(job.out);
  save_matrix((std::filesystem::path(job.out) / "x_hat.txt").string(), x_hat);
  if (!flags.quiet) {
    std::cout << "iterations " << iters << ", converged " << (converged ? "true" : "false");
    if (nmse) std::cout << ", NMSE_X " << *nmse << " dB";
    std::cout << "\nwrote " << job.out << "/x_hat.txt\n";
  }
  return 0;
}

inline int oracle_command(const std::string& suite, const CliFlags& flags) {
  std::vector<std::pair<std::string, oracle::Report>> reports;
  if (suite == "denoisers" || suite == "all") reports.emplace_back("denoisers", oracle::denoiser_suite());
  if (suite == "messages" || suite == "all") reports.emplace_back("messages", oracle::message_suite());
  if (suite == "metrics" || suite == "all") reports.emplace_back("metrics", oracle::metric_suite());
  bool ok = true;
  for (const auto& [name, report] : reports) {
    for (const auto& c : report.checks)
      if (!flags.quiet || !c.passed)
        std::cout << (c.passed ? "PASS " : "FAIL ") << name << ": " << c.name << " (" << c.detail << ")\n";
    ok = ok && report.passed();
  }
  std::cout << (ok ? "all oracle checks passed\n" : "oracle checks FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace detail

inline int cli_main(int argc, char** argv) {
  CLI::App app{"Matrix factorization by unitary approximate message passing", "uampmf"};
  app.require_subcommand(1);
  app.fallthrough();
  CliFlags flags;
  std::uint64_t seed = 0;
  std::string out;
  auto* seed_opt = app.add_option("--seed", seed, "Override the base seed");
  auto* out_opt = app.add_option("--out", out, "Override the output directory");
  app.add_flag("--quiet", flags.quiet, "Print only failures and summaries");
  app.add_flag("--timing", flags.timing, "Record wall-clock seconds per trial");
  app.add_flag("--full", flags.full, "Apply the [full.*] sections of the config");

  std::string path, suite;
  auto* run = app.add_subcommand("run", "Run a batch experiment");
  run->add_option("config", path, "Experiment configuration")->required();
  auto* uamp = app.add_subcommand("uamp", "Solve a linear model with UAMP");
  uamp->add_option("config", path, "UAMP job configuration")->required();
  auto* orc = app.add_subcommand("oracle", "Run reference comparisons");
  orc->add_option("suite", suite, "denoisers, messages, metrics or all")
      ->required()
      ->check(CLI::IsMember({"denoisers", "messages", "metrics", "all"}));
  auto* ver = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  if (*seed_opt) flags.seed = seed;
  if (*out_opt) flags.out = out;

  if (*ver) {
    std::cout << "uampmf " << kVersion << "\n";
    return 0;
  }
  if (*orc) return detail::oracle_command(suite, flags);

  if (!std::filesystem::is_regular_file(path)) {
    std::cerr << "error: config file not found: " << path << "\n";
    return 2;
  }
  try {
    return *run ? detail::run_command(path, flags) : detail::uamp_command(path, flags);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << path << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace uampmf
