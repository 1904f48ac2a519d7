#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace uampmf {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Shapes of two operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite or out-of-domain numeric input.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solver produced a non-finite or non-positive intermediate.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": " + shape_str(a.rows(), a.cols()) +
                         " vs " + shape_str(b.rows(), b.cols()));
  }
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Scalar Gaussian helpers shared by the denoisers.
namespace normal {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684758586311649;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056176398613974736378;

inline double pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double log_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(var) - kLogSqrt2Pi;
}

/// Standard normal CDF.
inline double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Below this standardized argument the CDF ratio phi/Phi is evaluated with the
// Laplace continued fraction instead of erfc.
inline constexpr double kAsymptoticCut = -6.0;

/// delta(t) = 1/R(t) - t for the Mills ratio R(t) = Phi_c(t)/phi(t), t > 0.
/// Continued fraction 1/(t + 2/(t + 3/(t + ...))).
inline double mills_excess(double t) {
  constexpr int kTerms = 200;
  double f = t;
  for (int k = kTerms - 1; k >= 1; --k) f = t + (k + 1) / f;
  return 1.0 / f;
}

/// log Phi(z), stable for very negative z.
inline double log_cdf(double z) {
  if (z > kAsymptoticCut) return std::log(cdf(z));
  const double t = -z;
  return -0.5 * z * z - kLogSqrt2Pi - std::log(t + mills_excess(t));
}

struct Moments {
  double mean;
  double var;
};

/// Moments of N(mu, sigma^2) truncated to [0, inf).
inline Moments truncated_nonneg(double mu, double sigma) {
  const double z = mu / sigma;
  if (z > kAsymptoticCut) {
    const double lam = pdf(z) / cdf(z);
    const double var = sigma * sigma * (1.0 - lam * (z + lam));
    return {mu + sigma * lam, std::max(var, 0.0)};
  }
  // lam = t + d with t = -z, so z + lam = d.
  const double t = -z;
  const double d = mills_excess(t);
  const double var = sigma * sigma * (1.0 - (t + d) * d);
  return {sigma * d, std::max(var, 0.0)};
}

}  // namespace normal

/// Decibel value with a finite floor for exact (zero-error) matches.
inline constexpr double kDecibelFloor = -300.0;

inline double to_decibel(double ratio) {
  if (!(ratio > 0.0)) return kDecibelFloor;
  return std::max(10.0 * std::log10(ratio), kDecibelFloor);
}

}  // namespace uampmf
