#pragma once

// Seeded synthetic data: Gaussian and correlated factors, sparse supports,
// outlier fields and SNR-calibrated additive noise. All generators draw from
// a caller-owned std::mt19937_64, so identical seeds give identical outputs.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "uampmf/core.hpp"

namespace uampmf {

using Rng = std::mt19937_64;

/// Generation knobs shared by the experiment harness.
struct GenSpec {
  std::uint64_t seed = 1;
  Index m = 0, n = 0, l = 0;
  double rho = 0.0;             // correlation parameter in [0, 1]
  double sparsity = 0.1;        // delta
  double outlier_lo = -10.0;
  double outlier_hi = 10.0;
  double snr_db = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("GenSpec: rho must lie in [0, 1]");
    if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
      throw std::invalid_argument("GenSpec: sparsity must lie in [0, 1]");
    }
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("GenSpec: snr_db must be finite or +inf");
    }
  }
};

inline Matrix gen_gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> gauss;
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = gauss(rng);
  return out;
}

/// Toeplitz matrix with (i, j) entry rho^|i - j| (0^0 = 1).
inline Matrix correlation_matrix(Index n, double rho) {
  Matrix c(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const auto k = static_cast<double>(i > j ? i - j : j - i);
      c(i, j) = k == 0.0 ? 1.0 : std::pow(rho, k);
    }
  return c;
}

/// C_L G C_R with G i.i.d. standard Gaussian and C_L, C_R correlation matrices.
inline Matrix gen_correlated(Index rows, Index cols, double rho, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("gen_correlated: rho outside [0, 1]");
  Matrix g = gen_gaussian(rows, cols, rng);
  if (rho == 0.0) return g;
  return correlation_matrix(rows, rho) * g * correlation_matrix(cols, rho);
}

enum class SparsityMode {
  kRate,            // every entry nonzero independently with probability delta
  kPerColumnCount,  // exactly k nonzeros per column, support uniform
};

/// Sparse matrix with i.i.d. standard Gaussian nonzeros.
inline Matrix gen_sparse(Index rows, Index cols, double rate_or_count, SparsityMode mode,
                         Rng& rng) {
  Matrix out = Matrix::Zero(rows, cols);
  std::normal_distribution<double> gauss;
  if (mode == SparsityMode::kRate) {
    if (!(rate_or_count >= 0.0 && rate_or_count <= 1.0)) {
      throw std::invalid_argument("gen_sparse: rate outside [0, 1]");
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) {
        const bool on = unif(rng) < rate_or_count;
        const double value = gauss(rng);
        if (on) out(i, j) = value;
      }
    return out;
  }
  const auto k = static_cast<Index>(std::llround(rate_or_count));
  if (k < 0 || k > rows) {
    throw std::invalid_argument("gen_sparse: per-column count " + std::to_string(k) +
                                " exceeds column length " + std::to_string(rows));
  }
  std::vector<Index> idx(static_cast<std::size_t>(rows));
  for (Index j = 0; j < cols; ++j) {
    std::iota(idx.begin(), idx.end(), Index{0});
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    for (Index t = 0; t < k; ++t) {
      std::uniform_int_distribution<Index> pick(t, rows - 1);
      std::swap(idx[static_cast<std::size_t>(t)], idx[static_cast<std::size_t>(pick(rng))]);
      out(idx[static_cast<std::size_t>(t)], j) = gauss(rng);
    }
  }
  return out;
}

/// Samples from N(theta, phi) truncated to [0, inf) by rejection.
inline double sample_nonneg_gaussian(double theta, double phi, Rng& rng) {
  std::normal_distribution<double> gauss(theta, std::sqrt(phi));
  for (;;) {
    const double x = gauss(rng);
    if (x >= 0.0) return x;
  }
}

/// i.i.d. N_+(theta, phi) entries; with rate < 1 each entry is zero with
/// probability 1 - rate.
inline Matrix gen_nonneg(Index rows, Index cols, double theta, double phi, Rng& rng,
                         double rate = 1.0) {
  if (theta < -4.0 * std::sqrt(phi)) {
    throw std::invalid_argument("gen_nonneg: location too negative for rejection sampling");
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix out = Matrix::Zero(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      if (rate < 1.0 && !(unif(rng) < rate)) continue;
      out(i, j) = sample_nonneg_gaussian(theta, phi, rng);
    }
  return out;
}

/// Outliers at rate delta with values Uniform[lo, hi].
inline Matrix gen_outliers(Index rows, Index cols, double delta, double lo, double hi, Rng& rng) {
  if (!(lo < hi)) throw std::invalid_argument("gen_outliers: lo must be below hi");
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("gen_outliers: rate outside [0, 1]");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_real_distribution<double> value(lo, hi);
  Matrix out = Matrix::Zero(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      const bool on = unif(rng) < delta;
      const double v = value(rng);
      if (on) out(i, j) = v;
    }
  return out;
}

struct NoisyObservation {
  Matrix y;
  double noise_var = 0.0;
};

/// Y = Z + W with W i.i.d. N(0, s2), s2 = ||Z||_F^2 / (M L 10^(snr_db/10)).
/// snr_db = +inf returns Y = Z exactly.
inline NoisyObservation add_noise(const Matrix& z, double snr_db, Rng& rng) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("add_noise: snr_db must be finite or +inf");
  }
  if (std::isinf(snr_db)) return {z, 0.0};
  const double power = z.squaredNorm();
  if (!(power > 0.0)) throw std::invalid_argument("add_noise: zero signal with finite SNR");
  const double noise_var =
      power / (static_cast<double>(z.size()) * std::pow(10.0, snr_db / 10.0));
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_var));
  Matrix y = z;
  for (Index j = 0; j < y.cols(); ++j)
    for (Index i = 0; i < y.rows(); ++i) y(i, j) += gauss(rng);
  return {std::move(y), noise_var};
}

/// Realized SNR in dB of an observation against its clean signal.
inline double realized_snr_db(const Matrix& z, const Matrix& y) {
  return 10.0 * std::log10(z.squaredNorm() / (y - z).squaredNorm());
}

}  // namespace uampmf
