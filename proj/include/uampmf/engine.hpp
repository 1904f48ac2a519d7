#pragma once

// Variational matrix factorization Y = H X + W driven by UAMP.
//
// Each sweep whitens the message from the likelihood to X (resp. H) through
// an eigendecomposition of its precision, runs UAMP on the whitened
// pseudo-model, projects the per-entry posteriors onto a matrix-normal belief
// with diagonal covariance, and finally refreshes the noise precision.
//
// Two schedules are available. The listing schedule runs a single UAMP pass
// per half-sweep, carries the UAMP dual across sweeps and uses the UAMP
// variances as belief variances. The default schedule iterates UAMP to a
// fixed point on each pseudo-model (dual restarted from zero) and takes the
// belief variances from the mean-field scalar channel with noise variance
// 1 / (lambda W_nn).

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "uampmf/core.hpp"
#include "uampmf/denoisers.hpp"

namespace uampmf {

/// MN(mean, diag(row_cov), diag(col_cov)).
struct MatrixNormalBelief {
  Matrix mean;
  Vector row_cov;
  Vector col_cov;

  void validate() const {
    if (row_cov.size() != mean.rows() || col_cov.size() != mean.cols()) {
      throw DimensionError("matrix-normal belief: covariance sizes do not match the mean");
    }
    if (!mean.allFinite() || !row_cov.allFinite() || !col_cov.allFinite() ||
        (row_cov.array() < 0.0).any() || (col_cov.array() < 0.0).any()) {
      throw NumericError("matrix-normal belief: invalid covariance or non-finite mean");
    }
  }
};

/// Whitened, unitarily transformed pseudo-model R = Phi Z + white noise,
/// with W = C diag(D) C^T the message precision, Phi = D^{1/2} C^T and
/// R = D^{-1/2} C^T (A^T B), so that Phi^T Phi = W and Phi^T R = A^T B.
struct WhitenedModel {
  Matrix r;
  Matrix phi;
  Vector d;
  Matrix c;
};

/// Source of the per-entry variances entering W and the noise update.
enum class BeliefVariance {
  kMeanField,  // denoiser evaluated at variance 1 / (lambda W_nn)
  kUamp,       // UAMP posterior variances
};

struct SolverOptions {
  double tol = 1e-7;
  int max_iters = 500;
  int restarts = 3;
  std::uint64_t seed = 0;
  double lambda_init = 1.0;
  /// When set, the noise precision is held at this value instead of learned.
  std::optional<double> fixed_lambda;
  /// Eigenvalues of W below max(eig) * eig_floor_ratio are raised to it.
  double eig_floor_ratio = 1e-12;
  /// C in the noise-precision update is floored at c_floor_ratio * ||Y||_F^2.
  double c_floor_ratio = 1e-12;
  /// UAMP passes per half-sweep; stops early once the relative change of
  /// the estimate falls below inner_tol.
  int inner_iters = 100;
  double inner_tol = 1e-5;
  /// Restart the UAMP dual from zero on every new pseudo-model.
  bool reset_dual = true;
  BeliefVariance belief = BeliefVariance::kMeanField;

  /// One UAMP pass per half-sweep, dual carried over, UAMP variances as
  /// beliefs.
  static SolverOptions listing() {
    SolverOptions o;
    o.inner_iters = 1;
    o.reset_dual = false;
    o.belief = BeliefVariance::kUamp;
    return o;
  }
};

struct FactorizationProblem {
  Matrix y;  // M x L
  Index n_inner = 0;
  Denoiser h_prior;  // over M x N
  Denoiser x_prior;  // over N x L
  SolverOptions options;

  Index m() const { return y.rows(); }
  Index l() const { return y.cols(); }
};

struct IterationRecord {
  double lambda = 0.0;
  double residual = 0.0;  // ||Y - H X||_F^2 / ||Y||_F^2
  double delta = 0.0;     // max relative change of X-hat and H-hat
};

struct EngineState {
  MatrixNormalBelief q_x;
  MatrixNormalBelief q_h;
  Matrix xi_x;   // N x L, UAMP variances
  Matrix xi_h;   // M x N
  Matrix var_x;  // N x L, belief variances
  Matrix var_h;  // M x N
  Matrix s_x;   // N x L
  Matrix s_h;   // M x N
  double lambda = 1.0;
  int iteration = 0;
  std::vector<IterationRecord> trace;
};

// ---------------------------------------------------------------------------
// Whitening
// ---------------------------------------------------------------------------

/// Whitens the precision W = A^T A + trace_scale * diag(cov) and returns
/// Phi = D^{1/2} C^T together with R = D^{-1/2} C^T A^T B. No inverse or
/// matrix square root is formed.
inline WhitenedModel whiten(const Matrix& a, double trace_scale, const Vector& cov,
                            const Matrix& b, double floor_ratio = 1e-12) {
  if (cov.size() != a.cols()) throw DimensionError("whiten: covariance size mismatch");
  if (a.rows() != b.rows()) throw DimensionError("whiten: A and B row counts differ");
  Matrix w = a.transpose() * a;
  w.diagonal() += trace_scale * cov;
  if (!w.allFinite()) throw NumericError("whiten: non-finite precision matrix");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(w);
  if (eig.info() != Eigen::Success) throw NumericError("whiten: eigendecomposition failed");
  Vector d = eig.eigenvalues();
  const double top = d.maxCoeff();
  if (!(top > 0.0)) {
    throw NumericError("whiten: precision matrix has no positive eigenvalue (degenerate factor)");
  }
  const double floor = top * floor_ratio;
  d = d.cwiseMax(floor);

  WhitenedModel out;
  out.c = eig.eigenvectors();
  out.d = d;
  const Vector root = d.cwiseSqrt();
  out.phi = root.asDiagonal() * out.c.transpose();
  out.r = root.cwiseInverse().asDiagonal() * (out.c.transpose() * (a.transpose() * b));
  return out;
}

/// Whitened model for X given q(H): W_X = H^T H + Tr(U_H) V_H, R_X = Phi_X H^T Y.
inline WhitenedModel build_whitened_x_model(const MatrixNormalBelief& q_h, const Matrix& y,
                                            double floor_ratio = 1e-12) {
  q_h.validate();
  if (y.rows() != q_h.mean.rows()) throw DimensionError("X model: Y rows must equal H rows");
  return whiten(q_h.mean, q_h.row_cov.sum(), q_h.col_cov, y, floor_ratio);
}

/// Whitened model for H^T given q(X): W_H = X X^T + Tr(V_X) U_X, R_H = Phi_H X Y^T.
inline WhitenedModel build_whitened_h_model(const MatrixNormalBelief& q_x, const Matrix& y,
                                            double floor_ratio = 1e-12) {
  q_x.validate();
  if (y.cols() != q_x.mean.cols()) throw DimensionError("H model: Y columns must equal X columns");
  return whiten(q_x.mean.transpose(), q_x.col_cov.sum(), q_x.row_cov, y.transpose(), floor_ratio);
}

inline double relative_change(const Matrix& now, const Matrix& before) {
  const double base = before.norm();
  const double diff = (now - before).norm();
  if (base > 0.0) return diff / base;
  return diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

// ---------------------------------------------------------------------------
// UAMP pass in matrix form
// ---------------------------------------------------------------------------

namespace detail {

/// Lines P, V_S, S, V_Q, Q of the UAMP recursion for Z (N x K) observed as
/// R = Phi Z + noise with precision lambda. Updates `s` in place and returns
/// the pseudo-observation field on Z.
inline PseudoObservationField uamp_matrix_pass(const WhitenedModel& model, const Matrix& xi,
                                               const Matrix& z_hat, Matrix& s, double lambda) {
  const Matrix phi2 = model.phi.cwiseAbs2();
  const Matrix v_p = phi2 * xi;
  const Matrix p = model.phi * z_hat - v_p.cwiseProduct(s);
  const Matrix v_s = (v_p.array() + 1.0 / lambda).inverse().matrix();
  s = v_s.cwiseProduct(model.r - p);
  const Matrix v_q = (phi2.transpose() * v_s).cwiseInverse();
  Matrix q = z_hat + v_q.cwiseProduct(model.phi.transpose() * s);
  if (!q.allFinite() || !v_q.allFinite() || (v_q.array() <= 0.0).any()) {
    throw DivergenceError("UAMP pass produced a non-finite or non-positive pseudo-observation");
  }
  return {std::move(q), v_q};
}

}  // namespace detail

namespace detail {

/// Runs UAMP on Z (N x K) for up to opt.inner_iters passes, refreshing the
/// prior's hyper-parameters after each pass. Returns the belief variances.
inline Matrix uamp_block_update(const WhitenedModel& model, Matrix& xi, Matrix& z_hat, Matrix& s,
                                double lambda, const SolverOptions& opt,
                                const std::function<DenoisedField(const PseudoObservationField&, bool)>& step) {
  if (opt.reset_dual) s.setZero();
  const int passes = std::max(1, opt.inner_iters);
  PseudoObservationField field;
  for (int t = 0; t < passes; ++t) {
    field = uamp_matrix_pass(model, xi, z_hat, s, lambda);
    DenoisedField post = step(field, true);
    if (!post.mean.allFinite() || !post.var.allFinite()) {
      throw DivergenceError("UAMP block update: denoiser returned non-finite values");
    }
    const double change = relative_change(post.mean, z_hat);
    xi = std::move(post.var);
    z_hat = std::move(post.mean);
    if (t > 0 && change < opt.inner_tol) break;
  }
  if (opt.belief == BeliefVariance::kUamp) return xi;
  // Mean-field channel: entry (n, k) sees the pseudo-observation with
  // variance 1 / (lambda W_nn), W_nn = ||phi_n||^2.
  const Vector w_diag = model.phi.colwise().squaredNorm().transpose();
  PseudoObservationField mf{field.q, Matrix(field.q.rows(), field.q.cols())};
  for (Index k = 0; k < mf.v.cols(); ++k) mf.v.col(k) = (lambda * w_diag).cwiseInverse();
  return step(mf, false).var;
}

}  // namespace detail

/// X update on the whitened model, then projection onto
/// MN(X-hat, diag(row means of the belief variances), I_L).
inline void update_x(EngineState& state, const WhitenedModel& model, Denoiser& x_prior,
                     const SolverOptions& opt = {}) {
  if (!(state.lambda > 0.0)) throw DivergenceError("update_x: noise precision must be positive");
  if (model.phi.cols() != state.q_x.mean.rows() || model.r.cols() != state.q_x.mean.cols()) {
    throw DimensionError("update_x: whitened model does not match X");
  }
  auto step = [&](const PseudoObservationField& f, bool learn) {
    DenoisedField post = x_prior.denoise(f);
    if (learn) x_prior.learn(f, post);
    return post;
  };
  state.var_x = detail::uamp_block_update(model, state.xi_x, state.q_x.mean, state.s_x,
                                          state.lambda, opt, step);
  state.q_x.row_cov = state.var_x.rowwise().mean();
  state.q_x.col_cov = Vector::Ones(state.var_x.cols());
}

/// H update on the transposed pseudo-model, projecting onto
/// MN(H-hat, I_M, diag(column means of the belief variances)).
inline void update_h(EngineState& state, const WhitenedModel& model, Denoiser& h_prior,
                     const SolverOptions& opt = {}) {
  if (!(state.lambda > 0.0)) throw DivergenceError("update_h: noise precision must be positive");
  if (model.phi.cols() != state.q_h.mean.cols() || model.r.cols() != state.q_h.mean.rows()) {
    throw DimensionError("update_h: whitened model does not match H");
  }
  auto step = [&](const PseudoObservationField& f_t, bool learn) {
    const PseudoObservationField f{f_t.q.transpose(), f_t.v.transpose()};
    DenoisedField post = h_prior.denoise(f);
    if (learn) h_prior.learn(f, post);
    return DenoisedField{post.mean.transpose(), post.var.transpose()};
  };
  Matrix xi_t = state.xi_h.transpose();
  Matrix h_t = state.q_h.mean.transpose();
  Matrix s_t = state.s_h.transpose();
  const Matrix var_t = detail::uamp_block_update(model, xi_t, h_t, s_t, state.lambda, opt, step);
  state.xi_h = xi_t.transpose();
  state.q_h.mean = h_t.transpose();
  state.s_h = s_t.transpose();
  state.var_h = var_t.transpose();
  state.q_h.col_cov = state.var_h.colwise().mean().transpose();
  state.q_h.row_cov = Vector::Ones(state.var_h.rows());
}

/// Expected squared residual E ||Y - H X||_F^2 under q(H) q(X).
inline double expected_residual(const Matrix& y, const MatrixNormalBelief& q_h,
                                const MatrixNormalBelief& q_x) {
  const double tr_uh = q_h.row_cov.sum();
  const double tr_vx = q_x.col_cov.sum();
  const Vector x_row_energy = q_x.mean.rowwise().squaredNorm().transpose();
  const Vector h_col_energy = q_h.mean.colwise().squaredNorm().transpose();
  return (y - q_h.mean * q_x.mean).squaredNorm() + tr_uh * x_row_energy.dot(q_h.col_cov) +
         tr_vx * q_x.row_cov.dot(h_col_energy) + tr_uh * tr_vx * q_x.row_cov.dot(q_h.col_cov);
}

/// Noise-precision update lambda = M L / C with C floored at
/// c_floor_ratio * ||Y||_F^2.
inline double update_lambda(const Matrix& y, const EngineState& state,
                            double c_floor_ratio = 1e-12) {
  const double c = expected_residual(y, state.q_h, state.q_x);
  if (!std::isfinite(c) || c < 0.0) {
    throw DivergenceError("update_lambda: invalid expected residual");
  }
  double floor = c_floor_ratio * y.squaredNorm();
  if (!(floor > 0.0)) floor = std::numeric_limits<double>::min();
  return static_cast<double>(y.size()) / std::max(c, floor);
}

// ---------------------------------------------------------------------------
// Solve loop
// ---------------------------------------------------------------------------

struct SolveResult {
  Matrix h;
  Matrix x;
  Matrix var_h;  // belief variances
  Matrix var_x;
  double lambda = 0.0;
  std::vector<IterationRecord> trace;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  int attempt = 0;  // index of the returned restart
  std::vector<double> attempt_residuals;
  Denoiser h_prior;  // hyper-parameter state at exit
  Denoiser x_prior;
};

/// Initial state for a given starting H-hat: X-hat = 0, Xi = 1, S = 0,
/// U_H = I_M, V_X = I_L. Entries fixed by the priors are pinned first.
inline EngineState initial_state(const FactorizationProblem& problem, Matrix h_init) {
  const Index m = problem.m(), l = problem.l(), n = problem.n_inner;
  EngineState st;
  st.xi_h = Matrix::Ones(m, n);
  st.q_h.mean = std::move(h_init);
  problem.h_prior.pin(st.q_h.mean, st.xi_h);
  st.q_h.row_cov = Vector::Ones(m);
  st.q_h.col_cov = st.xi_h.colwise().mean().transpose();
  st.xi_x = Matrix::Ones(n, l);
  st.q_x.mean = Matrix::Zero(n, l);
  problem.x_prior.pin(st.q_x.mean, st.xi_x);
  st.var_h = st.xi_h;
  st.var_x = st.xi_x;
  st.q_x.row_cov = st.xi_x.rowwise().mean();
  st.q_x.col_cov = Vector::Ones(l);
  st.s_x = Matrix::Zero(n, l);
  st.s_h = Matrix::Zero(m, n);
  st.lambda = problem.options.fixed_lambda.value_or(problem.options.lambda_init);
  return st;
}

/// One full sweep: X update, H update, noise precision. Returns the
/// convergence delta.
inline double engine_iterate(EngineState& st, const FactorizationProblem& problem,
                             Denoiser& h_prior, Denoiser& x_prior) {
  const SolverOptions& opt = problem.options;
  const Matrix x_prev = st.q_x.mean;
  const Matrix h_prev = st.q_h.mean;

  const WhitenedModel mx = build_whitened_x_model(st.q_h, problem.y, opt.eig_floor_ratio);
  update_x(st, mx, x_prior, opt);
  const WhitenedModel mh = build_whitened_h_model(st.q_x, problem.y, opt.eig_floor_ratio);
  update_h(st, mh, h_prior, opt);
  if (!opt.fixed_lambda) st.lambda = update_lambda(problem.y, st, opt.c_floor_ratio);
  if (!std::isfinite(st.lambda)) throw DivergenceError("noise precision is not finite");

  const double delta =
      std::max(relative_change(st.q_x.mean, x_prev), relative_change(st.q_h.mean, h_prev));
  const double y2 = problem.y.squaredNorm();
  const double resid = (problem.y - st.q_h.mean * st.q_x.mean).squaredNorm();
  ++st.iteration;
  st.trace.push_back({st.lambda, y2 > 0.0 ? resid / y2 : resid, delta});
  return delta;
}

inline void validate_problem(const FactorizationProblem& p) {
  if (p.y.size() == 0 || p.n_inner <= 0) throw DimensionError("solve: empty problem");
  if (!p.y.allFinite()) throw NumericError("solve: Y has non-finite entries");
  if (p.options.max_iters <= 0 || p.options.restarts < 0 || p.options.inner_iters <= 0) {
    throw std::invalid_argument(
        "solve: max_iters and inner_iters must be positive and restarts non-negative");
  }
}

/// Runs 1 + restarts attempts. The first starts from H-hat = all-ones; later
/// ones from i.i.d. standard Gaussian H-hat seeded by (seed, attempt). The
/// attempt with the smallest final ||Y - H X||_F^2 is returned; diverged
/// attempts only win when every attempt diverged.
inline SolveResult solve(const FactorizationProblem& problem) {
  validate_problem(problem);
  const SolverOptions& opt = problem.options;
  const Index m = problem.m(), n = problem.n_inner;

  SolveResult best;
  double best_score = std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (int attempt = 0; attempt <= opt.restarts; ++attempt) {
    Matrix h_init;
    if (attempt == 0) {
      h_init = Matrix::Ones(m, n);
    } else {
      std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(attempt));
      std::normal_distribution<double> gauss;
      h_init = Matrix::NullaryExpr(m, n, [&] { return gauss(rng); });
    }
    Denoiser h_prior = problem.h_prior;
    Denoiser x_prior = problem.x_prior;
    EngineState st = initial_state(problem, std::move(h_init));
    bool converged = false, diverged = false;
    EngineState last_good = st;
    Denoiser h_good = h_prior, x_good = x_prior;
    for (int it = 0; it < opt.max_iters; ++it) {
      try {
        const double delta = engine_iterate(st, problem, h_prior, x_prior);
        if (!st.q_h.mean.allFinite() || !st.q_x.mean.allFinite()) {
          throw DivergenceError("non-finite estimate");
        }
        last_good = st;
        h_good = h_prior;
        x_good = x_prior;
        if (delta < opt.tol) {
          converged = true;
          break;
        }
      } catch (const DivergenceError&) {
        diverged = true;
      } catch (const NumericError&) {
        diverged = true;
      }
      if (diverged) break;
    }
    const EngineState& fin = last_good;
    const double resid = (problem.y - fin.q_h.mean * fin.q_x.mean).squaredNorm();
    best.attempt_residuals.push_back(diverged ? std::numeric_limits<double>::infinity() : resid);
    // Diverged attempts rank behind every finished attempt.
    const double score = diverged ? std::numeric_limits<double>::max() : resid;
    if (!have_best || score < best_score) {
      have_best = true;
      best_score = score;
      auto residuals = std::move(best.attempt_residuals);
      best = SolveResult{fin.q_h.mean, fin.q_x.mean, fin.var_h, fin.var_x, fin.lambda, fin.trace,
                         fin.iteration, converged && !diverged, diverged, attempt, {},
                         h_good, x_good};
      best.attempt_residuals = std::move(residuals);
    }
  }
  return best;
}

inline SolveResult solve(FactorizationProblem problem, const SolverOptions& options) {
  problem.options = options;
  return solve(problem);
}

}  // namespace uampmf
