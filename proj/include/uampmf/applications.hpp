#pragma once

// Application builders: each one encodes a constrained factorization as a
// FactorizationProblem by choosing the priors on H and X, plus a matching
// synthetic instance generator for the experiment harness.

#include <optional>
#include <string>
#include <variant>

#include "uampmf/datagen.hpp"
#include "uampmf/denoisers.hpp"
#include "uampmf/engine.hpp"
#include "uampmf/metrics.hpp"

namespace uampmf {

/// Y = A B + E + W, solved as Y = [A, I] [B; E] + W.
struct RpcaSpec {
  Index m = 0, l = 0, rank = 0;
  double outlier_rate = 0.1;
  double rho = 0.0;
  double outlier_lo = -10.0, outlier_hi = 10.0;
  double shape = 0.0, scale = 0.0;  // Gamma hyper-parameters for E
  double alpha_init = 1.0;          // initial variance of B, learned
  /// Inner dimension N + M may not exceed this.
  Index max_inner = 4096;
};

/// Dictionary learning: Gaussian dictionary, sparse codes.
struct DlSpec {
  Index m = 0, n = 0, l = 0;
  Index per_column = 0;  // nonzeros per code column
  double rho = 0.0;
  double shape = 0.0, scale = 0.0;
};

/// Compressive sensing with matrix uncertainty: H = H_bar + H', H' ~ N(0, nu).
struct CsmuSpec {
  Index m = 0, n = 0, l = 0;
  Index per_column = 0;
  double nu = 0.01;
  bool common_support = false;
  double rho = 0.0;
  double shape = 0.0, scale = 0.0;
};

struct NmfSpec {
  Index m = 0, n = 0, l = 0;
  double theta = 0.0, phi = 1.0;
};

struct SparseMfSpec {
  Index m = 0, n = 0, l = 0;
  double rate = 0.2;
  double shape = 0.0, scale = 0.0;
};

struct SparseNmfSpec {
  Index m = 0, n = 0, l = 0;
  double rate = 0.1;
  double theta = 0.0, phi = 1.0;
};

using ApplicationSpec =
    std::variant<RpcaSpec, DlSpec, CsmuSpec, NmfSpec, SparseMfSpec, SparseNmfSpec>;

namespace detail {

inline void require_positive_dims(std::initializer_list<Index> dims, const char* app) {
  for (Index d : dims)
    if (d < 1) throw std::invalid_argument(std::string(app) + ": dimensions must be >= 1");
}

inline void require_rate(double r, const char* app) {
  if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument(std::string(app) + ": rate must lie in (0, 1)");
}

inline void require_y(const Matrix& y, Index m, Index l, const char* app) {
  if (y.rows() != m || y.cols() != l) {
    throw DimensionError(std::string(app) + ": Y is " + shape_str(y.rows(), y.cols()) +
                         ", spec expects " + shape_str(m, l));
  }
}

inline GaussianGammaPrior sbl_prior(double shape, double scale, bool row_shared = false) {
  GaussianGammaPrior p;
  p.shape = shape;
  p.scale = scale;
  p.row_shared = row_shared;
  return p;
}

}  // namespace detail

inline FactorizationProblem build_rpca(const RpcaSpec& spec, const Matrix& y) {
  detail::require_positive_dims({spec.m, spec.l, spec.rank}, "rpca");
  detail::require_y(y, spec.m, spec.l, "rpca");
  const Index inner = spec.rank + spec.m;
  if (inner > spec.max_inner) {
    throw std::invalid_argument("rpca: inner dimension " + std::to_string(inner) +
                                " exceeds the size budget " + std::to_string(spec.max_inner));
  }
  FactorizationProblem p;
  p.y = y;
  p.n_inner = inner;
  p.h_prior = make_block_prior(
      BlockAxis::kColumns,
      {{spec.rank, GaussianPrior{0.0, 1.0, false}},
       {spec.m, make_known_entries(Matrix::Identity(spec.m, spec.m))}});
  p.x_prior = make_block_prior(
      BlockAxis::kRows, {{spec.rank, GaussianPrior{0.0, spec.alpha_init, true}},
                         {spec.m, detail::sbl_prior(spec.shape, spec.scale)}});
  return p;
}

/// Pure low-rank model Y = A B + W with the same priors as the RPCA low-rank
/// block; used as a reference when no outliers are present.
inline FactorizationProblem build_low_rank(const RpcaSpec& spec, const Matrix& y) {
  detail::require_positive_dims({spec.m, spec.l, spec.rank}, "low-rank");
  detail::require_y(y, spec.m, spec.l, "low-rank");
  FactorizationProblem p;
  p.y = y;
  p.n_inner = spec.rank;
  p.h_prior = GaussianPrior{0.0, 1.0, false};
  p.x_prior = GaussianPrior{0.0, spec.alpha_init, true};
  return p;
}

inline FactorizationProblem build_dl(const DlSpec& spec, const Matrix& y) {
  detail::require_positive_dims({spec.m, spec.n, spec.l}, "dl");
  detail::require_y(y, spec.m, spec.l, "dl");
  FactorizationProblem p;
  p.y = y;
  p.n_inner = spec.n;
  p.h_prior = GaussianPrior{0.0, 1.0, false};
  p.x_prior = detail::sbl_prior(spec.shape, spec.scale);
  return p;
}

inline FactorizationProblem build_csmu(const CsmuSpec& spec, const Matrix& y,
                                       const std::optional<Matrix>& h_bar) {
  detail::require_positive_dims({spec.m, spec.n, spec.l}, "csmu");
  detail::require_y(y, spec.m, spec.l, "csmu");
  if (!h_bar) throw std::invalid_argument("csmu: the known matrix H_bar is required");
  if (h_bar->rows() != spec.m || h_bar->cols() != spec.n) {
    throw DimensionError("csmu: H_bar must be " + shape_str(spec.m, spec.n));
  }
  if (!(spec.nu >= 0.0)) throw std::invalid_argument("csmu: nu must be non-negative");
  FactorizationProblem p;
  p.y = y;
  p.n_inner = spec.n;
  p.h_prior = GaussianPrior{*h_bar, spec.nu, false};
  p.x_prior = detail::sbl_prior(spec.shape, spec.scale, spec.common_support);
  return p;
}

inline FactorizationProblem build_nmf(const NmfSpec& spec, const Matrix& y) {
  detail::require_positive_dims({spec.m, spec.n, spec.l}, "nmf");
  detail::require_y(y, spec.m, spec.l, "nmf");
  if (!(spec.phi > 0.0)) throw std::invalid_argument("nmf: phi must be positive");
  FactorizationProblem p;
  p.y = y;
  p.n_inner = spec.n;
  p.h_prior = NonNegativeGaussianPrior{spec.theta, spec.phi};
  p.x_prior = NonNegativeGaussianPrior{spec.theta, spec.phi};
  return p;
}

inline FactorizationProblem build_sparse_mf(const SparseMfSpec& spec, const Matrix& y) {
  detail::require_positive_dims({spec.m, spec.n, spec.l}, "sparse_mf");
  detail::require_y(y, spec.m, spec.l, "sparse_mf");
  FactorizationProblem p;
  p.y = y;
  p.n_inner = spec.n;
  p.h_prior = detail::sbl_prior(spec.shape, spec.scale);
  p.x_prior = detail::sbl_prior(spec.shape, spec.scale);
  return p;
}

inline FactorizationProblem build_sparse_nmf(const SparseNmfSpec& spec, const Matrix& y) {
  detail::require_positive_dims({spec.m, spec.n, spec.l}, "sparse_nmf");
  detail::require_y(y, spec.m, spec.l, "sparse_nmf");
  detail::require_rate(spec.rate, "sparse_nmf");
  FactorizationProblem p;
  p.y = y;
  p.n_inner = spec.n;
  p.h_prior = BernoulliNonNegPrior{spec.rate, spec.theta, spec.phi, false};
  p.x_prior = BernoulliNonNegPrior{spec.rate, spec.theta, spec.phi, false};
  return p;
}

// ---------------------------------------------------------------------------
// Synthetic instances
// ---------------------------------------------------------------------------

/// Ground truth and observation for one synthetic trial.
struct Instance {
  Matrix y;
  Matrix h;  // true H (for RPCA the low-rank factor A)
  Matrix x;  // true X (for RPCA the low-rank factor B)
  Matrix z;  // target of NMSE(Z): A B for RPCA, H X otherwise
  Matrix e;  // RPCA outliers, empty otherwise
  std::optional<Matrix> h_bar;  // CSMU known part
  double noise_var = 0.0;
};

/// Draws a trial. The SNR is measured against the noiseless observation
/// (H X, which for RPCA includes the outliers).
inline Instance make_instance(const ApplicationSpec& app, double snr_db, Rng& rng) {
  Instance inst;
  Matrix clean;
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, RpcaSpec>) {
          inst.h = gen_correlated(s.m, s.rank, s.rho, rng);
          inst.x = gen_correlated(s.rank, s.l, s.rho, rng);
          inst.e = gen_outliers(s.m, s.l, s.outlier_rate, s.outlier_lo, s.outlier_hi, rng);
          inst.z = inst.h * inst.x;
          clean = inst.z + inst.e;
        } else if constexpr (std::is_same_v<S, DlSpec>) {
          inst.h = gen_correlated(s.m, s.n, s.rho, rng);
          inst.x = gen_sparse(s.n, s.l, static_cast<double>(s.per_column),
                              SparsityMode::kPerColumnCount, rng);
          inst.z = inst.h * inst.x;
          clean = inst.z;
        } else if constexpr (std::is_same_v<S, CsmuSpec>) {
          Matrix h_bar = gen_correlated(s.m, s.n, s.rho, rng);
          Matrix h_pert = std::sqrt(s.nu) * gen_correlated(s.m, s.n, s.rho, rng);
          inst.h = h_bar + h_pert;
          inst.h_bar = std::move(h_bar);
          if (s.common_support) {
            // One support shared by every column.
            Matrix pattern = gen_sparse(s.n, 1, static_cast<double>(s.per_column),
                                        SparsityMode::kPerColumnCount, rng);
            Matrix values = gen_gaussian(s.n, s.l, rng);
            inst.x = Matrix::Zero(s.n, s.l);
            for (Index i = 0; i < s.n; ++i)
              if (pattern(i, 0) != 0.0) inst.x.row(i) = values.row(i);
          } else {
            inst.x = gen_sparse(s.n, s.l, static_cast<double>(s.per_column),
                                SparsityMode::kPerColumnCount, rng);
          }
          inst.z = inst.h * inst.x;
          clean = inst.z;
        } else if constexpr (std::is_same_v<S, NmfSpec>) {
          inst.h = gen_nonneg(s.m, s.n, s.theta, s.phi, rng);
          inst.x = gen_nonneg(s.n, s.l, s.theta, s.phi, rng);
          inst.z = inst.h * inst.x;
          clean = inst.z;
        } else if constexpr (std::is_same_v<S, SparseMfSpec>) {
          inst.h = gen_sparse(s.m, s.n, s.rate, SparsityMode::kRate, rng);
          inst.x = gen_sparse(s.n, s.l, s.rate, SparsityMode::kRate, rng);
          inst.z = inst.h * inst.x;
          clean = inst.z;
        } else {
          inst.h = gen_nonneg(s.m, s.n, s.theta, s.phi, rng, s.rate);
          inst.x = gen_nonneg(s.n, s.l, s.theta, s.phi, rng, s.rate);
          inst.z = inst.h * inst.x;
          clean = inst.z;
        }
      },
      app);
  NoisyObservation obs = add_noise(clean, snr_db, rng);
  inst.y = std::move(obs.y);
  inst.noise_var = obs.noise_var;
  return inst;
}

/// Builds the problem for an application from an instance's observation.
inline FactorizationProblem build_problem(const ApplicationSpec& app, const Instance& inst) {
  return std::visit(
      [&](const auto& s) -> FactorizationProblem {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, RpcaSpec>) return build_rpca(s, inst.y);
        else if constexpr (std::is_same_v<S, DlSpec>) return build_dl(s, inst.y);
        else if constexpr (std::is_same_v<S, CsmuSpec>) return build_csmu(s, inst.y, inst.h_bar);
        else if constexpr (std::is_same_v<S, NmfSpec>) return build_nmf(s, inst.y);
        else if constexpr (std::is_same_v<S, SparseMfSpec>) return build_sparse_mf(s, inst.y);
        else return build_sparse_nmf(s, inst.y);
      },
      app);
}

/// Low-rank estimate A-hat B-hat from an RPCA solve.
inline Matrix rpca_low_rank(const SolveResult& r, Index rank) {
  return r.h.leftCols(rank) * r.x.topRows(rank);
}

/// Outlier estimate E-hat from an RPCA solve.
inline Matrix rpca_outliers(const SolveResult& r, Index rank) {
  return r.x.bottomRows(r.x.rows() - rank);
}

}  // namespace uampmf
