#pragma once

// Unitary AMP for the linear model y = A x + w, w ~ N(0, 1/beta I).
// The model is rotated by U^T from the SVD A = U S V^T, giving r = Phi x + w'
// with Phi = S V^T, and the AMP recursion runs on (r, Phi).
//
// Two variants: kV1 tracks a variance per entry; kV2 averages the variances
// so that only two matrix-vector products are needed per iteration.

#include <vector>

#include "uampmf/core.hpp"
#include "uampmf/denoisers.hpp"

namespace uampmf {

enum class UampVariant { kV1, kV2 };

struct UnitaryModel {
  Vector r;       // U^T y
  Matrix phi;     // U^T A = S V^T
  Vector lambda;  // S S^T 1, length M
};

inline UnitaryModel unitary_transform(const Vector& y, const Matrix& a) {
  if (y.size() != a.rows()) {
    throw DimensionError("unitary_transform: y has length " + std::to_string(y.size()) +
                         ", A has " + std::to_string(a.rows()) + " rows");
  }
  if (!y.allFinite() || !a.allFinite()) throw NumericError("unitary_transform: non-finite input");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix& u = svd.matrixU();
  UnitaryModel out;
  out.r = u.transpose() * y;
  out.phi = u.transpose() * a;
  out.lambda = Vector::Zero(a.rows());
  const Vector& sv = svd.singularValues();
  out.lambda.head(sv.size()) = sv.cwiseAbs2();
  return out;
}

struct UampState {
  Vector x;      // x^t
  Vector tau_x;  // per-entry variance; constant across entries under kV2
  Vector s;      // s^{t-1}
  int iteration = 0;

  static UampState initial(Index n, double tau0 = 1.0) {
    return {Vector::Zero(n), Vector::Constant(n, tau0), Vector(), 0};
  }
};

/// One pass of the UAMP recursion. The denoiser's hyper-parameters are
/// refreshed from the new posterior before returning.
inline UampState uamp_iterate(const UampState& state, const UnitaryModel& model, double beta,
                              Denoiser& denoiser, UampVariant variant) {
  const Matrix& phi = model.phi;
  const Index m = phi.rows();
  const Index n = phi.cols();
  if (state.x.size() != n || state.tau_x.size() != n) {
    throw DimensionError("uamp_iterate: state does not match Phi columns");
  }
  if (model.r.size() != m || model.lambda.size() != m) {
    throw DimensionError("uamp_iterate: r/lambda do not match Phi rows");
  }
  const Vector s_prev = state.s.size() == m ? state.s : Vector::Zero(m);
  const double noise_var = 1.0 / beta;

  Vector tau_p;
  if (variant == UampVariant::kV1) {
    tau_p = phi.cwiseAbs2() * state.tau_x;
  } else {
    tau_p = state.tau_x(0) * model.lambda;
  }
  const Vector p = phi * state.x - tau_p.cwiseProduct(s_prev);
  const Vector tau_s = (tau_p.array() + noise_var).inverse().matrix();
  const Vector s = tau_s.cwiseProduct(model.r - p);

  Vector tau_q;
  if (variant == UampVariant::kV1) {
    tau_q = (phi.transpose().cwiseAbs2() * tau_s).cwiseInverse();
  } else {
    const double precision = model.lambda.dot(tau_s) / static_cast<double>(n);
    tau_q = Vector::Constant(n, 1.0 / precision);
  }
  if (!tau_q.allFinite() || (tau_q.array() <= 0.0).any()) {
    throw DivergenceError("uamp_iterate: non-positive or non-finite tau_q at iteration " +
                          std::to_string(state.iteration));
  }
  const Vector q = state.x + tau_q.cwiseProduct(phi.transpose() * s);

  PseudoObservationField field{q, tau_q};
  DenoisedField post = denoiser.denoise(field);
  denoiser.learn(field, post);

  UampState next;
  next.x = post.mean.col(0);
  if (variant == UampVariant::kV1) {
    next.tau_x = post.var.col(0);
  } else {
    next.tau_x = Vector::Constant(n, post.var.mean());
  }
  next.s = s;
  next.iteration = state.iteration + 1;
  if (!next.x.allFinite() || !next.tau_x.allFinite()) {
    throw DivergenceError("uamp_iterate: non-finite estimate at iteration " +
                          std::to_string(next.iteration));
  }
  return next;
}

struct UampOptions {
  UampVariant variant = UampVariant::kV2;
  int max_iters = 500;
  double tol = 1e-8;
  double tau_init = 1.0;
};

struct UampResult {
  Vector x;
  Vector tau_x;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  std::vector<double> deltas;  // relative change per iteration
};

/// Runs UAMP until the relative change of x drops below tol or max_iters.
/// On divergence the last finite iterate is returned with diverged set.
inline UampResult uamp_solve(const Vector& y, const Matrix& a, double beta, Denoiser denoiser,
                             const UampOptions& opts = {}) {
  const UnitaryModel model = unitary_transform(y, a);
  UampState state = UampState::initial(a.cols(), opts.tau_init);
  UampResult result;
  for (int t = 0; t < opts.max_iters; ++t) {
    UampState next;
    try {
      next = uamp_iterate(state, model, beta, denoiser, opts.variant);
    } catch (const DivergenceError&) {
      result.diverged = true;
      break;
    }
    const double base = state.x.norm();
    const double delta = base > 0.0 ? (next.x - state.x).norm() / base
                                    : std::numeric_limits<double>::infinity();
    result.deltas.push_back(delta);
    state = std::move(next);
    if (delta < opts.tol) {
      result.converged = true;
      break;
    }
  }
  result.x = state.x;
  result.tau_x = state.tau_x;
  result.iterations = state.iteration;
  return result;
}

}  // namespace uampmf
