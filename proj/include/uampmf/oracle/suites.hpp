#pragma once

// Oracle suites: each runs one family of reference comparisons and reports
// named pass/fail checks. Shared by the `oracle` CLI subcommand and the
// acceptance binary.

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "uampmf/datagen.hpp"
#include "uampmf/denoisers.hpp"
#include "uampmf/engine.hpp"
#include "uampmf/metrics.hpp"
#include "uampmf/oracle/messages.hpp"
#include "uampmf/oracle/quadrature.hpp"

namespace uampmf::oracle {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::vector<Check> checks;
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Mean error relative to max(|a|, |b|, posterior sd): a zero posterior mean
/// has no meaningful relative error on its own.
inline double mean_error(double a, double b, double var) {
  const double d = std::abs(a - b);
  if (d == 0.0) return 0.0;
  return d / std::max({std::abs(a), std::abs(b), std::sqrt(var)});
}

/// The (q, v) grid: q in {-10, ..., 10}, v = 10^{-3 + k/2}, k = 0..12.
inline PseudoObservationField quadrature_grid() {
  PseudoObservationField f{Matrix(21, 13), Matrix(21, 13)};
  for (Index j = 0; j < 13; ++j)
    for (Index i = 0; i < 21; ++i) {
      f.q(i, j) = static_cast<double>(i) - 10.0;
      f.v(i, j) = std::pow(10.0, -3.0 + 0.5 * static_cast<double>(j));
    }
  return f;
}

struct GridComparison {
  double max_rel_mean = 0.0;
  double max_rel_var = 0.0;
};

inline GridComparison compare_on_grid(const Denoiser& d,
                                      const std::function<QuadMoments(double, double)>& ref) {
  const PseudoObservationField grid = quadrature_grid();
  const DenoisedField out = d.denoise(grid);
  GridComparison c;
  for (Index j = 0; j < grid.cols(); ++j)
    for (Index i = 0; i < grid.rows(); ++i) {
      const QuadMoments m = ref(grid.q(i, j), grid.v(i, j));
      c.max_rel_mean = std::max(c.max_rel_mean, mean_error(out.mean(i, j), m.mean, m.var));
      c.max_rel_var = std::max(c.max_rel_var, relative_error(out.var(i, j), m.var));
    }
  return c;
}

/// Every denoiser kind against quadrature on the 21 x 13 grid.
inline Report denoiser_suite(double tol = 1e-6) {
  Report r;
  auto add = [&](const std::string& name, const Denoiser& d,
                 const std::function<QuadMoments(double, double)>& ref) {
    const GridComparison c = compare_on_grid(d, ref);
    const bool ok = c.max_rel_mean <= tol && c.max_rel_var <= tol;
    r.checks.push_back({name, ok, fmt("max rel err mean %.3g, var %.3g", c.max_rel_mean, c.max_rel_var)});
  };
  add("gaussian(0.5, 2)", GaussianPrior{0.5, 2.0, false},
      [](double q, double v) { return gaussian_posterior(q, v, 0.5, 2.0); });
  add("gaussian(flat)", GaussianPrior{0.0, std::numeric_limits<double>::infinity(), false},
      [](double q, double v) {
        return gaussian_posterior(q, v, 0.0, std::numeric_limits<double>::infinity());
      });
  {
    GaussianGammaPrior gg;
    gg.precision = Matrix::Constant(21, 13, 0.7);
    add("gaussian_gamma(0.7)", gg, [](double q, double v) { return gaussian_gamma_posterior(q, v, 0.7); });
  }
  {
    GaussianGammaPrior gg;
    gg.precision = Matrix::Constant(21, 13, 25.0);
    add("gaussian_gamma(25)", gg, [](double q, double v) { return gaussian_gamma_posterior(q, v, 25.0); });
  }
  add("nonneg_gaussian(0, 1)", NonNegativeGaussianPrior{0.0, 1.0},
      [](double q, double v) { return nonneg_gaussian_posterior(q, v, 0.0, 1.0); });
  add("nonneg_gaussian(1.5, 0.5)", NonNegativeGaussianPrior{1.5, 0.5},
      [](double q, double v) { return nonneg_gaussian_posterior(q, v, 1.5, 0.5); });
  add("nonneg_gaussian(-2, 1)", NonNegativeGaussianPrior{-2.0, 1.0},
      [](double q, double v) { return nonneg_gaussian_posterior(q, v, -2.0, 1.0); });
  add("bernoulli_nonneg(0.3, 0, 1)", BernoulliNonNegPrior{0.3, 0.0, 1.0, false},
      [](double q, double v) { return bernoulli_nonneg_posterior(q, v, 0.3, 0.0, 1.0); });
  add("bernoulli_nonneg(0.05, 1, 2)", BernoulliNonNegPrior{0.05, 1.0, 2.0, false},
      [](double q, double v) { return bernoulli_nonneg_posterior(q, v, 0.05, 1.0, 2.0); });
  {
    // Masked entries are exact point masses; unmasked ones fall back to the channel.
    Mask mask = Mask::Constant(21, 13, false);
    for (Index j = 0; j < 13; j += 2) mask.col(j).setConstant(true);
    KnownEntriesPrior k{Matrix::Constant(21, 13, 5.0), mask};
    const PseudoObservationField grid = quadrature_grid();
    const DenoisedField out = Denoiser(k).denoise(grid);
    double worst = 0.0;
    for (Index j = 0; j < 13; ++j)
      for (Index i = 0; i < 21; ++i) {
        const QuadMoments m = mask(i, j)
                                  ? QuadMoments{5.0, 0.0, 0.0}
                                  : gaussian_posterior(grid.q(i, j), grid.v(i, j), 0.0,
                                                       std::numeric_limits<double>::infinity());
        worst = std::max({worst, mean_error(out.mean(i, j), m.mean, m.var),
                          relative_error(out.var(i, j), m.var)});
      }
    r.checks.push_back({"known_entries(5)", worst <= tol, fmt("max rel err %.3g", worst)});
  }
  {
    GaussianGammaPrior gg;
    gg.precision = Matrix::Constant(21, 6, 2.0);
    BlockPrior b = make_block_prior(BlockAxis::kColumns,
                                    {{7, NonNegativeGaussianPrior{0.0, 1.0}}, {6, gg}});
    add("block(nonneg | gaussian_gamma)", b, [](double q, double v) {
      // Column of the grid is recovered from v = 10^{-3 + j/2}.
      const auto j = static_cast<int>(std::lround((std::log10(v) + 3.0) * 2.0));
      return j < 7 ? nonneg_gaussian_posterior(q, v, 0.0, 1.0) : gaussian_gamma_posterior(q, v, 2.0);
    });
  }
  return r;
}

inline MatrixNormalBelief random_h_belief(Index m, Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  MatrixNormalBelief b;
  b.mean = gen_gaussian(m, n, rng);
  b.row_cov = Vector::Ones(m);
  b.col_cov = Vector::NullaryExpr(n, [&] { return u(rng); });
  return b;
}

inline MatrixNormalBelief random_x_belief(Index n, Index l, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  MatrixNormalBelief b;
  b.mean = gen_gaussian(n, l, rng);
  b.row_cov = Vector::NullaryExpr(n, [&] { return u(rng); });
  b.col_cov = Vector::Ones(l);
  return b;
}

inline double rel_norm(const Matrix& a, const Matrix& b) {
  const double base = std::max(a.norm(), b.norm());
  return base > 0.0 ? (a - b).norm() / base : 0.0;
}

/// Whitening identities over random beliefs, Kronecker brute force of both
/// messages, and the Monte-Carlo expected residual.
inline Report message_suite(int cases = 200, long mc_samples = 100000) {
  Report r;
  std::mt19937_64 rng(20240607);
  std::uniform_int_distribution<int> dim(1, 8);
  double worst_gram = 0.0, worst_info = 0.0;
  for (int c = 0; c < cases; ++c) {
    const Index m = dim(rng), n = dim(rng), l = dim(rng);
    const Matrix y = gen_gaussian(m, l, rng);
    if (c % 2 == 0) {
      const MatrixNormalBelief qh = random_h_belief(m, n, rng);
      const WhitenedModel w = build_whitened_x_model(qh, y);
      Matrix precision = qh.mean.transpose() * qh.mean;
      precision.diagonal() += qh.row_cov.sum() * qh.col_cov;
      worst_gram = std::max(worst_gram, rel_norm(w.phi.transpose() * w.phi, precision));
      worst_info = std::max(worst_info, rel_norm(w.phi.transpose() * w.r, qh.mean.transpose() * y));
    } else {
      const MatrixNormalBelief qx = random_x_belief(n, l, rng);
      const WhitenedModel w = build_whitened_h_model(qx, y);
      Matrix precision = qx.mean * qx.mean.transpose();
      precision.diagonal() += qx.col_cov.sum() * qx.row_cov;
      worst_gram = std::max(worst_gram, rel_norm(w.phi.transpose() * w.phi, precision));
      worst_info = std::max(worst_info, rel_norm(w.phi.transpose() * w.r, qx.mean * y.transpose()));
    }
  }
  r.checks.push_back({"whitening: Phi^T Phi equals the message precision", worst_gram <= 1e-9,
                      fmt("%d cases, max rel err %.3g", cases, worst_gram)});
  r.checks.push_back({"whitening: Phi^T R equals H^T Y / X Y^T", worst_info <= 1e-10,
                      fmt("%d cases, max rel err %.3g", cases, worst_info)});

  {
    const MatrixNormalBelief qh = random_h_belief(3, 2, rng);
    const Matrix y = gen_gaussian(3, 2, rng);
    const VecMessage ref = x_message_bruteforce(qh, y);
    const VecMessage got = x_message_from_model(build_whitened_x_model(qh, y), 2);
    const double e = std::max(rel_norm(got.precision, ref.precision),
                              rel_norm(got.information, ref.information));
    r.checks.push_back({"X message vs Kronecker brute force (3x2x2)", e <= 1e-10, fmt("rel err %.3g", e)});
  }
  {
    const MatrixNormalBelief qx = random_x_belief(2, 3, rng);
    const Matrix y = gen_gaussian(2, 3, rng);
    const VecMessage ref = h_message_bruteforce(qx, y);
    const VecMessage got = h_message_from_model(build_whitened_h_model(qx, y), 2);
    const double e = std::max(rel_norm(got.precision, ref.precision),
                              rel_norm(got.information, ref.information));
    r.checks.push_back({"H message vs Kronecker brute force (2x2x3)", e <= 1e-10, fmt("rel err %.3g", e)});
  }
  {
    // Non-identity U_H and V_X exercise every term of C.
    std::uniform_real_distribution<double> u(0.1, 0.8);
    MatrixNormalBelief qh = random_h_belief(3, 2, rng);
    MatrixNormalBelief qx = random_x_belief(2, 3, rng);
    qh.row_cov = Vector::NullaryExpr(3, [&] { return u(rng); });
    qx.col_cov = Vector::NullaryExpr(3, [&] { return u(rng); });
    const Matrix y = gen_gaussian(3, 3, rng);
    const double c = expected_residual(y, qh, qx);
    const MonteCarloEstimate mc = residual_monte_carlo(y, qh, qx, mc_samples, 99);
    const double z = std::abs(mc.mean - c) / mc.std_error;
    r.checks.push_back({"expected residual C vs Monte Carlo (3x2x3)", z <= 3.0,
                        fmt("|C - MC| = %.3g standard errors, C = %.6g", z, c)});
  }
  return r;
}

/// Resolved-NMSE invariance and exhaustive matching.
inline Report metric_suite(int fuzz = 100) {
  Report r;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 12);
  std::uniform_real_distribution<double> mag(0.2, 5.0);
  std::bernoulli_distribution sign(0.5);
  double worst = kDecibelFloor;
  for (int c = 0; c < fuzz; ++c) {
    const Index m = dim(rng), n = dim(rng);
    const Matrix h = gen_gaussian(m, n, rng);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix hp(m, n);
    for (Index j = 0; j < n; ++j)
      hp.col(perm[static_cast<std::size_t>(j)]) = (sign(rng) ? -1.0 : 1.0) * mag(rng) * h.col(j);
    worst = std::max(worst, nmse_h_resolved(h, hp));
  }
  r.checks.push_back({"resolved NMSE invariance under H P D", worst <= -250.0,
                      fmt("%d cases, worst %.1f dB", fuzz, worst)});
  double gap = 0.0;
  int count = 0;
  for (Index n = 1; n <= 6; ++n)
    for (int c = 0; c < 20; ++c, ++count) {
      const Index m = n + 2;
      const Matrix h = gen_gaussian(m, n, rng);
      const Matrix e = gen_gaussian(m, n, rng) + (c % 2 ? h : Matrix::Zero(m, n));
      const double ref = resolved_ratio_bruteforce(h, e);
      const double got = resolve_permutation_scale(h, e).ratio;
      gap = std::max(gap, std::abs(got - ref) / std::max(ref, 1e-300));
    }
  r.checks.push_back({"Hungarian matching equals exhaustive search (N <= 6)", gap <= 1e-12,
                      fmt("%d cases, max rel gap %.3g", count, gap)});
  return r;
}

}  // namespace uampmf::oracle
