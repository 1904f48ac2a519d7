#pragma once

// Reference posterior moments for the scalar channel q = x + w, w ~ N(0, v),
// computed by adaptive Gauss-Kronrod quadrature. Independent of the closed
// forms in denoisers.hpp; used by the oracle suites and the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace uampmf::oracle {

struct QuadMoments {
  double mean = 0.0;
  double var = 0.0;
  double log_mass = 0.0;  // log of the integral of exp(log_density)
};

namespace detail {

inline double gk(const std::function<double(double)>& f, double a, double b) {
  if (!(b > a)) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(f, a, b, 10, 1e-12);
}

/// Breakpoints growing geometrically away from `peak` with initial step
/// `step`, out to `reach`, clipped to [lo, hi].
inline std::vector<double> breakpoints(double peak, double step, double reach, double lo,
                                       double hi) {
  std::vector<double> pts{peak};
  for (double d = step; d < reach * 2.0; d *= 2.0) {
    if (peak + d < hi) pts.push_back(peak + d);
    if (peak - d > lo) pts.push_back(peak - d);
  }
  if (std::isfinite(lo)) pts.push_back(lo);
  if (std::isfinite(hi)) pts.push_back(hi);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

}  // namespace detail

/// Moments of the density proportional to exp(log_density(x)) on [lo, hi].
/// `center` and `width` locate the bulk of the mass (they only shape the
/// integration grid); log_density must be concave so that its maximum on the
/// interval is at the clipped center.
inline QuadMoments continuous_moments(const std::function<double(double)>& log_density, double lo,
                                      double hi, double center, double width) {
  const double peak = std::clamp(center, lo, hi);
  // Near a truncation boundary far from the center the density decays on the
  // scale width^2 / distance.
  double step = width;
  if (peak != center) step = std::min(width, width * width / std::abs(center - peak));
  step *= 0.25;
  const double shift = log_density(peak);
  const double reach = std::abs(center - peak) + 60.0 * width;
  const std::vector<double> pts = detail::breakpoints(peak, step, reach, lo, hi);

  auto integrate = [&](const std::function<double(double)>& g) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) total += detail::gk(g, pts[i], pts[i + 1]);
    return total;
  };
  auto weight = [&](double x) { return std::exp(log_density(x) - shift); };
  const double z0 = integrate(weight);
  const double z1 = integrate([&](double x) { return (x - peak) * weight(x); });
  const double mean = peak + z1 / z0;
  const double z2 = integrate([&](double x) { return (x - mean) * (x - mean) * weight(x); });
  return {mean, z2 / z0, shift + std::log(z0)};
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * d * d / var - 0.5 * std::log(2.0 * M_PI * var);
}

/// Prior N(mu, sigma2); sigma2 = +inf is flat.
inline QuadMoments gaussian_posterior(double q, double v, double mu, double sigma2) {
  const double inf = std::numeric_limits<double>::infinity();
  if (std::isinf(sigma2)) {
    return continuous_moments([&](double x) { return log_normal_pdf(q, x, v); }, -inf, inf, q,
                              std::sqrt(v));
  }
  const double s2 = sigma2 * v / (sigma2 + v);
  const double c = (mu * v + q * sigma2) / (sigma2 + v);
  return continuous_moments(
      [&](double x) { return log_normal_pdf(x, mu, sigma2) + log_normal_pdf(q, x, v); }, -inf, inf,
      c, std::sqrt(s2));
}

/// Prior N(0, 1/gamma); gamma = 0 is flat.
inline QuadMoments gaussian_gamma_posterior(double q, double v, double gamma) {
  return gaussian_posterior(q, v, 0.0,
                            gamma > 0.0 ? 1.0 / gamma : std::numeric_limits<double>::infinity());
}

/// Prior proportional to N(theta, phi) on [0, inf).
inline QuadMoments nonneg_gaussian_posterior(double q, double v, double theta, double phi) {
  const double s2 = phi * v / (phi + v);
  const double c = (theta * v + q * phi) / (phi + v);
  return continuous_moments(
      [&](double x) { return log_normal_pdf(x, theta, phi) + log_normal_pdf(q, x, v); }, 0.0,
      std::numeric_limits<double>::infinity(), c, std::sqrt(s2));
}

/// Prior (1 - rate) delta_0 + rate N_+(theta, phi), with N_+ normalized on
/// [0, inf).
inline QuadMoments bernoulli_nonneg_posterior(double q, double v, double rate, double theta,
                                              double phi) {
  const boost::math::normal_distribution<double> std_normal;
  const double log_norm = std::log(boost::math::cdf(std_normal, theta / std::sqrt(phi)));
  const QuadMoments slab = nonneg_gaussian_posterior(q, v, theta, phi);
  const double log_slab = std::log(rate) - log_norm + slab.log_mass;
  const double log_spike = std::log1p(-rate) + log_normal_pdf(q, 0.0, v);
  const double top = std::max(log_slab, log_spike);
  const double ws = std::exp(log_slab - top), w0 = std::exp(log_spike - top);
  const double pi = ws / (ws + w0);
  const double mean = pi * slab.mean;
  const double second = pi * (slab.var + slab.mean * slab.mean);
  return {mean, second - mean * mean, top + std::log(ws + w0)};
}

/// Relative difference |a - b| / max(|a|, |b|); 0 when equal.
inline double relative_error(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

}  // namespace uampmf::oracle
