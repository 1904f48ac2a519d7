#pragma once

// Brute-force references for the likelihood messages and the expected
// residual. Everything here works on vectorized matrices (column-major vec)
// with explicit Kronecker-structured covariances; sizes are meant to be tiny.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "uampmf/engine.hpp"

namespace uampmf::oracle {

/// Covariance of vec(A) for A ~ MN(mean, diag(row_cov), diag(col_cov)):
/// V kron U.
inline Matrix vec_covariance(const MatrixNormalBelief& b) {
  const Index r = b.row_cov.size(), c = b.col_cov.size();
  Matrix cov = Matrix::Zero(r * c, r * c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) cov(j * r + i, j * r + i) = b.col_cov(j) * b.row_cov(i);
  return cov;
}

inline Vector vec(const Matrix& a) { return Eigen::Map<const Vector>(a.data(), a.size()); }

/// Gaussian message on vec(Z) written as precision and information vector,
/// both up to the common factor lambda.
struct VecMessage {
  Matrix precision;
  Vector information;
};

/// E[B^T B] and E[B]^T b for B = sum_k a_k basis_k with a = vec(A) drawn from
/// the belief: sum_{k,k'} E[a_k a_k'] basis_k^T basis_k'.
inline VecMessage linear_message(const MatrixNormalBelief& b, const std::vector<Matrix>& basis,
                                 const Vector& target) {
  const Vector mean = vec(b.mean);
  const Matrix second = mean * mean.transpose() + vec_covariance(b);
  const Index cols = basis.front().cols();
  VecMessage out{Matrix::Zero(cols, cols), Vector::Zero(cols)};
  Matrix expected = Matrix::Zero(basis.front().rows(), cols);
  for (std::size_t k = 0; k < basis.size(); ++k) {
    expected += mean(static_cast<Index>(k)) * basis[k];
    for (std::size_t kk = 0; kk < basis.size(); ++kk) {
      const double e = second(static_cast<Index>(k), static_cast<Index>(kk));
      if (e != 0.0) out.precision += e * basis[k].transpose() * basis[kk];
    }
  }
  out.information = expected.transpose() * target;
  return out;
}

/// Message from the likelihood to vec(X): vec(H X) = (I_L kron H) vec(X).
inline VecMessage x_message_bruteforce(const MatrixNormalBelief& q_h, const Matrix& y) {
  const Index m = q_h.mean.rows(), n = q_h.mean.cols(), l = y.cols();
  std::vector<Matrix> basis;
  for (Index k = 0; k < m * n; ++k) {
    Matrix e = Matrix::Zero(m, n);
    e(k % m, k / m) = 1.0;
    Matrix big = Matrix::Zero(m * l, n * l);
    for (Index t = 0; t < l; ++t) big.block(t * m, t * n, m, n) = e;
    basis.push_back(std::move(big));
  }
  return linear_message(q_h, basis, vec(y));
}

/// Message from the likelihood to vec(H): vec(H X) = (X^T kron I_M) vec(H).
inline VecMessage h_message_bruteforce(const MatrixNormalBelief& q_x, const Matrix& y) {
  const Index n = q_x.mean.rows(), l = q_x.mean.cols(), m = y.rows();
  std::vector<Matrix> basis;
  for (Index k = 0; k < n * l; ++k) {
    Matrix e = Matrix::Zero(n, l);
    e(k % n, k / n) = 1.0;
    const Matrix et = e.transpose();
    Matrix big = Matrix::Zero(m * l, m * n);
    for (Index a = 0; a < l; ++a)
      for (Index b = 0; b < n; ++b)
        if (et(a, b) != 0.0) big.block(a * m, b * m, m, m) = et(a, b) * Matrix::Identity(m, m);
    basis.push_back(std::move(big));
  }
  return linear_message(q_x, basis, vec(y));
}

/// The same message assembled from a whitened X-side model:
/// precision I_L kron Phi^T Phi, information vec(Phi^T R).
inline VecMessage x_message_from_model(const WhitenedModel& w, Index l) {
  const Matrix g = w.phi.transpose() * w.phi;
  const Index n = g.rows();
  VecMessage out{Matrix::Zero(n * l, n * l), vec(w.phi.transpose() * w.r)};
  for (Index t = 0; t < l; ++t) out.precision.block(t * n, t * n, n, n) = g;
  return out;
}

/// H-side: precision (Phi^T Phi) kron I_M, information vec((Phi^T R)^T).
inline VecMessage h_message_from_model(const WhitenedModel& w, Index m) {
  const Matrix g = w.phi.transpose() * w.phi;
  const Index n = g.rows();
  Matrix prec = Matrix::Zero(n * m, n * m);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) prec.block(a * m, b * m, m, m) = g(a, b) * Matrix::Identity(m, m);
  const Matrix info = (w.phi.transpose() * w.r).transpose();
  return {std::move(prec), vec(info)};
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean of ||Y - H X||_F^2 with H, X drawn independently from their
/// matrix-normal beliefs.
inline MonteCarloEstimate residual_monte_carlo(const Matrix& y, const MatrixNormalBelief& q_h,
                                               const MatrixNormalBelief& q_x, long samples,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto draw = [&](const MatrixNormalBelief& b) {
    Matrix out = b.mean;
    for (Index j = 0; j < out.cols(); ++j)
      for (Index i = 0; i < out.rows(); ++i)
        out(i, j) += std::sqrt(b.row_cov(i) * b.col_cov(j)) * gauss(rng);
    return out;
  };
  double sum = 0.0, sum2 = 0.0;
  for (long s = 0; s < samples; ++s) {
    const Matrix h = draw(q_h);
    const Matrix x = draw(q_x);
    const double r = (y - h * x).squaredNorm();
    sum += r;
    sum2 += r * r;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(sum2 / n - mean * mean, 0.0) * n / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

/// Exhaustive minimum over column permutations of
/// ||H-hat P S - H||^2 / ||H||^2 with per-column least-squares scales.
inline double resolved_ratio_bruteforce(const Matrix& h_true, const Matrix& h_hat) {
  const Index n = h_true.cols();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double err = 0.0;
    for (Index i = 0; i < n; ++i) {
      const auto e = h_hat.col(perm[static_cast<std::size_t>(i)]);
      const double ee = e.squaredNorm();
      const double s = ee > 0.0 ? e.dot(h_true.col(i)) / ee : 0.0;
      err += (s * e - h_true.col(i)).squaredNorm();
    }
    best = std::min(best, err);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / h_true.squaredNorm();
}

}  // namespace uampmf::oracle
