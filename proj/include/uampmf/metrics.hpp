#pragma once

#include <limits>
#include <vector>

#include "uampmf/core.hpp"

namespace uampmf {

/// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns assignment[row] = column.
inline std::vector<Index> min_cost_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw DimensionError("assignment: cost matrix must be square");
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; slot 0 is the virtual root.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(n);
  for (Index j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

/// ||estimate - truth||^2 / ||truth||^2 in dB.
inline double nmse_db(const Matrix& truth, const Matrix& estimate) {
  require_same_shape(truth, estimate, "nmse");
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw NumericError("nmse: reference matrix is zero");
  return to_decibel((estimate - truth).squaredNorm() / denom);
}

/// ||Z - H X||^2 / ||Z||^2 in dB.
inline double nmse_z(const Matrix& z_true, const Matrix& h_hat, const Matrix& x_hat) {
  if (h_hat.cols() != x_hat.rows()) throw DimensionError("nmse_z: inner dimensions differ");
  return nmse_db(z_true, h_hat * x_hat);
}

inline double nmse_x(const Matrix& x_true, const Matrix& x_hat) { return nmse_db(x_true, x_hat); }

struct ResolvedMatch {
  std::vector<Index> column;  // column[i]: estimate column matched to true column i
  Vector scale;               // least-squares scale applied to that column
  double ratio = 0.0;         // ||H-hat J - H||^2 / ||H||^2
};

/// Resolves the column permutation and per-column (signed) scale between an
/// estimate and the truth. Matching true column i to estimate column j with
/// the least-squares scale leaves ||h_i||^2 - <h_i, e_j>^2 / ||e_j||^2, so the
/// optimal permutation maximizes sum <h_i, e_j>^2 / ||e_j||^2, a per-row
/// rescaling of the squared normalized correlation.
inline ResolvedMatch resolve_permutation_scale(const Matrix& h_true, const Matrix& h_hat) {
  require_same_shape(h_true, h_hat, "nmse_h_resolved");
  const Index n = h_true.cols();
  const Vector true_energy = h_true.colwise().squaredNorm().transpose();
  if ((true_energy.array() <= 0.0).any()) {
    throw NumericError("nmse_h_resolved: reference matrix has a zero column");
  }
  const Vector est_energy = h_hat.colwise().squaredNorm().transpose();
  const Matrix inner = h_true.transpose() * h_hat;  // (i, j) = <h_i, e_j>
  Matrix gain(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      gain(i, j) = est_energy(j) > 0.0 ? inner(i, j) * inner(i, j) / est_energy(j) : 0.0;

  ResolvedMatch out;
  out.column = min_cost_assignment(-gain);
  out.scale.resize(n);
  double err = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Index j = out.column[static_cast<std::size_t>(i)];
    const double s = est_energy(j) > 0.0 ? inner(i, j) / est_energy(j) : 0.0;
    out.scale(i) = s;
    err += (s * h_hat.col(j) - h_true.col(i)).squaredNorm();
  }
  out.ratio = err / true_energy.sum();
  return out;
}

/// min_J ||H-hat J - H||^2 / ||H||^2 in dB over column permutations with
/// signed per-column scales.
inline double nmse_h_resolved(const Matrix& h_true, const Matrix& h_hat) {
  return to_decibel(resolve_permutation_scale(h_true, h_hat).ratio);
}

}  // namespace uampmf
