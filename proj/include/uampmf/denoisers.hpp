#pragma once

// Entry-wise MMSE denoisers for the scalar pseudo-channel q = x + w,
// w ~ N(0, v). Each prior maps a field of (q, v) pairs to posterior
// means and variances and may refresh its hyper-parameters from the result.

#include <algorithm>
#include <limits>
#include <utility>
#include <variant>
#include <vector>

#include "uampmf/core.hpp"

namespace uampmf {

/// Pseudo-observation means and variances (Q and V_Q).
struct PseudoObservationField {
  Matrix q;
  Matrix v;

  Index rows() const { return q.rows(); }
  Index cols() const { return q.cols(); }

  void validate() const {
    require_same_shape(q, v, "pseudo-observation field");
    if (!q.allFinite() || !v.allFinite()) {
      throw NumericError("pseudo-observation field has non-finite entries");
    }
    if ((v.array() <= 0.0).any()) {
      throw NumericError("pseudo-observation variances must be strictly positive");
    }
  }
};

/// Posterior means and variances (X-hat and Xi).
struct DenoisedField {
  Matrix mean;
  Matrix var;
};

/// Clamp range for learned Gaussian-Gamma precisions.
inline constexpr double kGammaFloor = 1e-10;
inline constexpr double kGammaCeiling = 1e12;
/// Floor for a learned prior variance.
inline constexpr double kAlphaFloor = 1e-10;

/// A scalar broadcast to every entry, or one value per entry.
class EntryParam {
 public:
  EntryParam(double value = 0.0) : scalar_(value) {}  // NOLINT: implicit by intent
  EntryParam(Matrix values) : values_(std::move(values)), per_entry_(true) {}  // NOLINT

  bool per_entry() const { return per_entry_; }
  const Matrix& values() const { return values_; }
  double scalar() const { return scalar_; }

  double operator()(Index i, Index j) const { return per_entry_ ? values_(i, j) : scalar_; }

  void check_shape(Index rows, Index cols, const char* what) const {
    if (per_entry_ && (values_.rows() != rows || values_.cols() != cols)) {
      throw DimensionError(std::string(what) + ": parameter is " +
                           shape_str(values_.rows(), values_.cols()) + ", field is " +
                           shape_str(rows, cols));
    }
  }

  EntryParam block(Index r0, Index c0, Index rows, Index cols) const {
    if (!per_entry_) return EntryParam(scalar_);
    return EntryParam(Matrix(values_.block(r0, c0, rows, cols)));
  }

 private:
  double scalar_ = 0.0;
  Matrix values_;
  bool per_entry_ = false;
};

// ---------------------------------------------------------------------------
// Prior families
// ---------------------------------------------------------------------------

/// N(mean, variance). variance = +inf is a flat prior, 0 pins the entry.
/// With learn_variance the (scalar) variance is refreshed from the posterior
/// second moments after every denoise pass.
struct GaussianPrior {
  EntryParam mean = 0.0;
  EntryParam variance = 1.0;
  bool learn_variance = false;
};

/// Hierarchical N(0, 1/gamma) with gamma ~ Ga(shape, scale).
/// `precision` is the running estimate Gamma-hat; an empty matrix is sized on
/// first use and filled with `initial_precision`.
struct GaussianGammaPrior {
  double shape = 0.0;  // epsilon
  double scale = 0.0;  // eta
  bool row_shared = false;
  double initial_precision = 1.0;
  Matrix precision;
};

/// N(theta, phi) truncated to [0, inf).
struct NonNegativeGaussianPrior {
  double location = 0.0;  // theta
  double scale = 1.0;     // phi
};

/// Entries under `mask` are fixed to `values`; the rest are left flat.
struct KnownEntriesPrior {
  Matrix values;
  Mask mask;
};

/// (1 - rate) * delta_0 + rate * N_+(theta, phi). With learn_rate the rate is
/// re-estimated as the mean posterior slab responsibility.
struct BernoulliNonNegPrior {
  double rate = 0.1;      // delta
  double location = 0.0;  // theta
  double scale = 1.0;     // phi
  bool learn_rate = false;
};

enum class BlockAxis { kRows, kColumns };

struct DenoiserBlock;

/// Disjoint row or column ranges, each with its own prior.
struct BlockPrior {
  BlockAxis axis = BlockAxis::kRows;
  std::vector<DenoiserBlock> blocks;
};

/// Value-semantic prior: copying a Denoiser copies its hyper-parameter state.
class Denoiser {
 public:
  using Kind = std::variant<GaussianPrior, GaussianGammaPrior, NonNegativeGaussianPrior,
                            KnownEntriesPrior, BernoulliNonNegPrior, BlockPrior>;

  Denoiser() : kind_(GaussianPrior{}) {}
  template <typename K>
    requires std::is_constructible_v<Kind, K&&> &&
             (!std::is_same_v<std::remove_cvref_t<K>, Denoiser>)
  Denoiser(K&& k) : kind_(std::forward<K>(k)) {}  // NOLINT: implicit by intent

  const Kind& kind() const { return kind_; }
  Kind& kind() { return kind_; }

  template <typename K>
  const K* get() const { return std::get_if<K>(&kind_); }
  template <typename K>
  K* get() { return std::get_if<K>(&kind_); }

  /// Posterior moments under the current hyper-parameters.
  DenoisedField denoise(const PseudoObservationField& field) const;

  /// Refresh learnable hyper-parameters from a posterior computed by denoise()
  /// on the same field.
  void learn(const PseudoObservationField& field, const DenoisedField& posterior);

  /// Positions whose value the prior fixes exactly; used to pin initial
  /// estimates. Unpinned entries of `values` are left untouched.
  void pin(Matrix& values, Matrix& variances) const;

 private:
  Kind kind_;
};

struct DenoiserBlock {
  Index begin = 0;  // first row/column of the range
  Index end = 0;    // one past the last
  Denoiser prior;
};

// ---------------------------------------------------------------------------
// Scalar posteriors
// ---------------------------------------------------------------------------

namespace detail {

inline normal::Moments gaussian_posterior(double q, double v, double mean, double var) {
  if (std::isinf(var)) return {q, v};
  if (var == 0.0) return {mean, 0.0};
  const double denom = var + v;
  return {(mean * v + q * var) / denom, var * v / denom};
}

inline normal::Moments gaussian_gamma_posterior(double q, double v, double gamma) {
  const double denom = 1.0 + gamma * v;
  return {q / denom, v / denom};
}

/// Untruncated product N(x; theta, phi) N(q; x, v), as (mean, sigma).
inline std::pair<double, double> slab_product(double q, double v, double theta, double phi) {
  const double denom = phi + v;
  return {(theta * v + q * phi) / denom, std::sqrt(phi * v / denom)};
}

inline normal::Moments nonneg_gaussian_posterior(double q, double v, double theta, double phi) {
  const auto [mu, sigma] = slab_product(q, v, theta, phi);
  return normal::truncated_nonneg(mu, sigma);
}

struct MixturePosterior {
  normal::Moments moments;
  double responsibility;  // posterior probability of the slab
};

inline MixturePosterior bernoulli_nonneg_posterior(double q, double v,
                                                   const BernoulliNonNegPrior& p) {
  const auto [mu, sigma] = slab_product(q, v, p.location, p.scale);
  const double log_slab = normal::log_pdf(q, p.location, p.scale + v) +
                          normal::log_cdf(mu / sigma) -
                          normal::log_cdf(p.location / std::sqrt(p.scale));
  const double log_spike = normal::log_pdf(q, 0.0, v);
  const double a = std::log(p.rate) + log_slab;
  const double b = std::log1p(-p.rate) + log_spike;
  // Logistic of (a - b), evaluated on the side that cannot overflow.
  const double d = a - b;
  const double pi = d >= 0.0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
  const auto slab = normal::truncated_nonneg(mu, sigma);
  const double mean = pi * slab.mean;
  const double var = pi * slab.var + pi * (1.0 - pi) * slab.mean * slab.mean;
  return {{mean, std::max(var, 0.0)}, pi};
}

template <typename F>
DenoisedField map_entries(const PseudoObservationField& field, F&& f) {
  DenoisedField out{Matrix(field.rows(), field.cols()), Matrix(field.rows(), field.cols())};
  for (Index j = 0; j < field.cols(); ++j) {
    for (Index i = 0; i < field.rows(); ++i) {
      const normal::Moments m = f(field.q(i, j), field.v(i, j), i, j);
      out.mean(i, j) = m.mean;
      out.var(i, j) = m.var;
    }
  }
  return out;
}

inline PseudoObservationField slice(const PseudoObservationField& f, BlockAxis axis, Index begin,
                                    Index end) {
  if (axis == BlockAxis::kRows) {
    return {f.q.middleRows(begin, end - begin), f.v.middleRows(begin, end - begin)};
  }
  return {f.q.middleCols(begin, end - begin), f.v.middleCols(begin, end - begin)};
}

inline DenoisedField slice(const DenoisedField& f, BlockAxis axis, Index begin, Index end) {
  if (axis == BlockAxis::kRows) {
    return {f.mean.middleRows(begin, end - begin), f.var.middleRows(begin, end - begin)};
  }
  return {f.mean.middleCols(begin, end - begin), f.var.middleCols(begin, end - begin)};
}

inline void check_partition(const BlockPrior& p, Index extent) {
  Index next = 0;
  for (const auto& b : p.blocks) {
    if (b.begin != next || b.end <= b.begin) {
      throw DimensionError("block prior ranges must partition the axis without gaps or overlap");
    }
    next = b.end;
  }
  if (next != extent) {
    throw DimensionError("block prior covers " + std::to_string(next) + " of " +
                         std::to_string(extent) + " along its axis");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Hyper-parameter updates
// ---------------------------------------------------------------------------

/// gamma = (1 + 2 shape) / (2 scale + Xi + |x|^2), clamped to
/// [kGammaFloor, kGammaCeiling]. With row_shared the second-moment statistic
/// is averaged along each row and the resulting precision broadcast.
inline Matrix update_gamma(const DenoisedField& posterior, double shape, double scale,
                           bool row_shared = false) {
  if ((posterior.var.array() < 0.0).any()) {
    throw NumericError("update_gamma: negative posterior variance");
  }
  Matrix energy = posterior.var + posterior.mean.cwiseAbs2();
  if (row_shared) {
    const Vector row_mean = energy.rowwise().mean();
    energy = row_mean.replicate(1, energy.cols());
  }
  const double numer = 1.0 + 2.0 * shape;
  return energy.unaryExpr([&](double e) {
    const double denom = 2.0 * scale + e;
    if (!(denom > 0.0)) return kGammaCeiling;
    return std::clamp(numer / denom, kGammaFloor, kGammaCeiling);
  });
}

/// Denoise a block with a zero-mean Gaussian prior of variance alpha_prev and
/// return the refreshed variance (mean posterior second moment, floored).
inline std::pair<double, DenoisedField> update_alpha(const PseudoObservationField& field,
                                                     double alpha_prev) {
  if (!(alpha_prev > 0.0)) throw NumericError("update_alpha: alpha must be positive");
  const Index count = field.q.size();
  if (count == 0) throw DimensionError("update_alpha: empty block");
  field.validate();
  DenoisedField out = detail::map_entries(field, [&](double q, double v, Index, Index) {
    return detail::gaussian_posterior(q, v, 0.0, alpha_prev);
  });
  const double second_moment = (out.var + out.mean.cwiseAbs2()).sum();
  const double alpha = std::max(second_moment / static_cast<double>(count), kAlphaFloor);
  return {alpha, std::move(out)};
}

inline DenoisedField denoise_bernoulli_gaussian_nonneg(const BernoulliNonNegPrior& p,
                                                       const PseudoObservationField& field) {
  if (!(p.rate > 0.0 && p.rate < 1.0)) {
    throw NumericError("Bernoulli non-negative Gaussian: rate must lie in (0, 1)");
  }
  if (!(p.scale > 0.0)) throw NumericError("Bernoulli non-negative Gaussian: scale must be > 0");
  field.validate();
  return detail::map_entries(field, [&](double q, double v, Index, Index) {
    return detail::bernoulli_nonneg_posterior(q, v, p).moments;
  });
}

/// Mean posterior slab probability over a field.
inline double mean_slab_responsibility(const BernoulliNonNegPrior& p,
                                       const PseudoObservationField& field) {
  double sum = 0.0;
  for (Index j = 0; j < field.cols(); ++j)
    for (Index i = 0; i < field.rows(); ++i)
      sum += detail::bernoulli_nonneg_posterior(field.q(i, j), field.v(i, j), p).responsibility;
  return sum / static_cast<double>(field.q.size());
}

// ---------------------------------------------------------------------------
// Denoiser dispatch
// ---------------------------------------------------------------------------

inline DenoisedField denoise(const Denoiser& prior, const PseudoObservationField& field) {
  return prior.denoise(field);
}

inline DenoisedField Denoiser::denoise(const PseudoObservationField& field) const {
  field.validate();
  const Index rows = field.rows();
  const Index cols = field.cols();
  return std::visit(
      [&](const auto& p) -> DenoisedField {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GaussianPrior>) {
          p.mean.check_shape(rows, cols, "Gaussian prior mean");
          p.variance.check_shape(rows, cols, "Gaussian prior variance");
          return detail::map_entries(field, [&](double q, double v, Index i, Index j) {
            return detail::gaussian_posterior(q, v, p.mean(i, j), p.variance(i, j));
          });
        } else if constexpr (std::is_same_v<P, GaussianGammaPrior>) {
          if (p.precision.size() == 0) {
            return detail::map_entries(field, [&](double q, double v, Index, Index) {
              return detail::gaussian_gamma_posterior(q, v, p.initial_precision);
            });
          }
          require_same_shape(p.precision, field.q, "Gaussian-Gamma precision");
          return detail::map_entries(field, [&](double q, double v, Index i, Index j) {
            return detail::gaussian_gamma_posterior(q, v, p.precision(i, j));
          });
        } else if constexpr (std::is_same_v<P, NonNegativeGaussianPrior>) {
          if (!(p.scale > 0.0)) throw NumericError("non-negative Gaussian: scale must be > 0");
          return detail::map_entries(field, [&](double q, double v, Index, Index) {
            return detail::nonneg_gaussian_posterior(q, v, p.location, p.scale);
          });
        } else if constexpr (std::is_same_v<P, KnownEntriesPrior>) {
          require_same_shape(p.values, field.q, "known-entries values");
          require_same_shape(p.mask, field.q, "known-entries mask");
          return detail::map_entries(field, [&](double q, double v, Index i, Index j) {
            return p.mask(i, j) ? normal::Moments{p.values(i, j), 0.0} : normal::Moments{q, v};
          });
        } else if constexpr (std::is_same_v<P, BernoulliNonNegPrior>) {
          return denoise_bernoulli_gaussian_nonneg(p, field);
        } else {
          const Index extent = p.axis == BlockAxis::kRows ? rows : cols;
          detail::check_partition(p, extent);
          DenoisedField out{Matrix(rows, cols), Matrix(rows, cols)};
          for (const auto& b : p.blocks) {
            DenoisedField part = b.prior.denoise(detail::slice(field, p.axis, b.begin, b.end));
            const Index n = b.end - b.begin;
            if (p.axis == BlockAxis::kRows) {
              out.mean.middleRows(b.begin, n) = part.mean;
              out.var.middleRows(b.begin, n) = part.var;
            } else {
              out.mean.middleCols(b.begin, n) = part.mean;
              out.var.middleCols(b.begin, n) = part.var;
            }
          }
          return out;
        }
      },
      kind_);
}

inline void Denoiser::learn(const PseudoObservationField& field, const DenoisedField& posterior) {
  std::visit(
      [&](auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, GaussianPrior>) {
          if (p.learn_variance) {
            const double m2 = (posterior.var + posterior.mean.cwiseAbs2()).sum();
            p.variance = std::max(m2 / static_cast<double>(posterior.mean.size()), kAlphaFloor);
          }
        } else if constexpr (std::is_same_v<P, GaussianGammaPrior>) {
          p.precision = update_gamma(posterior, p.shape, p.scale, p.row_shared);
        } else if constexpr (std::is_same_v<P, BernoulliNonNegPrior>) {
          if (p.learn_rate) {
            const double r = mean_slab_responsibility(p, field);
            p.rate = std::clamp(r, 1e-6, 1.0 - 1e-6);
          }
        } else if constexpr (std::is_same_v<P, BlockPrior>) {
          for (auto& b : p.blocks) {
            b.prior.learn(detail::slice(field, p.axis, b.begin, b.end),
                          detail::slice(posterior, p.axis, b.begin, b.end));
          }
        }
      },
      kind_);
}

inline void Denoiser::pin(Matrix& values, Matrix& variances) const {
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnownEntriesPrior>) {
          require_same_shape(p.values, values, "known-entries values");
          for (Index j = 0; j < values.cols(); ++j)
            for (Index i = 0; i < values.rows(); ++i)
              if (p.mask(i, j)) {
                values(i, j) = p.values(i, j);
                variances(i, j) = 0.0;
              }
        } else if constexpr (std::is_same_v<P, GaussianPrior>) {
          p.variance.check_shape(values.rows(), values.cols(), "Gaussian prior variance");
          for (Index j = 0; j < values.cols(); ++j)
            for (Index i = 0; i < values.rows(); ++i)
              if (p.variance(i, j) == 0.0) {
                values(i, j) = p.mean(i, j);
                variances(i, j) = 0.0;
              }
        } else if constexpr (std::is_same_v<P, BlockPrior>) {
          for (const auto& b : p.blocks) {
            const Index n = b.end - b.begin;
            if (p.axis == BlockAxis::kRows) {
              Matrix v = values.middleRows(b.begin, n), s = variances.middleRows(b.begin, n);
              b.prior.pin(v, s);
              values.middleRows(b.begin, n) = v;
              variances.middleRows(b.begin, n) = s;
            } else {
              Matrix v = values.middleCols(b.begin, n), s = variances.middleCols(b.begin, n);
              b.prior.pin(v, s);
              values.middleCols(b.begin, n) = v;
              variances.middleCols(b.begin, n) = s;
            }
          }
        }
      },
      kind_);
}

// Convenience constructors.

inline BlockPrior make_block_prior(BlockAxis axis,
                                   std::vector<std::pair<Index, Denoiser>> sized_blocks) {
  BlockPrior out{axis, {}};
  Index begin = 0;
  for (auto& [size, prior] : sized_blocks) {
    out.blocks.push_back({begin, begin + size, std::move(prior)});
    begin += size;
  }
  return out;
}

inline KnownEntriesPrior make_known_entries(Matrix values) {
  Mask mask = Mask::Constant(values.rows(), values.cols(), true);
  return {std::move(values), std::move(mask)};
}

}  // namespace uampmf
