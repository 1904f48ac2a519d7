#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "uampmf/datagen.hpp"
#include "uampmf/metrics.hpp"
#include "uampmf/oracle/messages.hpp"

using namespace uampmf;

TEST(Nmse, ExactEstimateHitsFloor) {
  Rng rng(1);
  const Matrix z = gen_gaussian(4, 6, rng);
  EXPECT_EQ(nmse_db(z, z), kDecibelFloor);
  EXPECT_DOUBLE_EQ(nmse_db(z, Matrix::Zero(4, 6)), 0.0);
  EXPECT_NEAR(nmse_db(z, z / 2.0), -6.0205999132796239, 1e-12);
  EXPECT_NEAR(nmse_x(z, z / 2.0), -6.0205999132796239, 1e-12);
}

TEST(Nmse, ProductForm) {
  Rng rng(2);
  const Matrix h = gen_gaussian(5, 3, rng), x = gen_gaussian(3, 4, rng);
  EXPECT_EQ(nmse_z(h * x, h, x), kDecibelFloor);
  EXPECT_DOUBLE_EQ(nmse_z(h * x, h, Matrix::Zero(3, 4)), 0.0);
  EXPECT_NEAR(nmse_z(h * x, h / 2.0, x), -6.0205999132796239, 1e-12);
  EXPECT_THROW(nmse_z(h * x, h, Matrix::Zero(2, 4)), DimensionError);
}

TEST(Nmse, ZeroReferenceThrows) {
  EXPECT_THROW(nmse_db(Matrix::Zero(2, 2), Matrix::Ones(2, 2)), NumericError);
  EXPECT_THROW(nmse_db(Matrix::Zero(2, 2), Matrix::Ones(2, 3)), DimensionError);
}

TEST(Assignment, SolvesSmallProblem) {
  Matrix cost(3, 3);
  cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const std::vector<Index> a = min_cost_assignment(cost);
  // Optimum 1 + 2 + 2 = 5 with rows -> (1, 0, 2).
  EXPECT_EQ(a, (std::vector<Index>{1, 0, 2}));
}

TEST(Resolved, IdentityAndAmbiguityClass) {
  Rng rng(3);
  const Matrix h = gen_gaussian(8, 5, rng);
  EXPECT_EQ(nmse_h_resolved(h, h), kDecibelFloor);
  std::vector<Index> perm(5);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix hp(8, 5);
  const double scales[] = {-2.0, 0.5, 3.0, -0.1, 7.0};
  for (Index j = 0; j < 5; ++j) hp.col(perm[static_cast<std::size_t>(j)]) = scales[j] * h.col(j);
  EXPECT_EQ(nmse_h_resolved(h, hp), kDecibelFloor);
}

TEST(Resolved, FuzzInvariance) {
  Rng rng(4);
  std::uniform_int_distribution<int> dim(1, 10);
  std::uniform_real_distribution<double> mag(0.1, 10.0);
  for (int t = 0; t < 100; ++t) {
    const Index m = dim(rng), n = dim(rng);
    const Matrix h = gen_gaussian(m, n, rng);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix hp(m, n);
    for (Index j = 0; j < n; ++j)
      hp.col(perm[static_cast<std::size_t>(j)]) = (t % 2 ? -1.0 : 1.0) * mag(rng) * h.col(j);
    EXPECT_LE(nmse_h_resolved(h, hp), -250.0) << "case " << t;
  }
}

TEST(Resolved, MatchesExhaustiveSearch) {
  Rng rng(5);
  for (Index n = 1; n <= 6; ++n)
    for (int t = 0; t < 15; ++t) {
      const Matrix h = gen_gaussian(n + 3, n, rng);
      const Matrix e = 0.7 * h + gen_gaussian(n + 3, n, rng);
      const double ref = oracle::resolved_ratio_bruteforce(h, e);
      EXPECT_NEAR(resolve_permutation_scale(h, e).ratio, ref, 1e-12 * ref) << "n " << n;
    }
}

TEST(Resolved, ThreeColumnExhaustiveExample) {
  Matrix h(3, 3), e(3, 3);
  h << 1, 0, 2, 0, 1, 1, 1, 1, 0;
  e << 0.1, 2.1, -1, 0.9, 0.2, 0, 1.2, 1.9, -1.1;
  EXPECT_NEAR(resolve_permutation_scale(h, e).ratio, oracle::resolved_ratio_bruteforce(h, e), 1e-14);
}

TEST(Resolved, NeverWorseThanUnresolved) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const Matrix h = gen_gaussian(6, 4, rng);
    const Matrix e = gen_gaussian(6, 4, rng);
    EXPECT_LE(nmse_h_resolved(h, e), nmse_db(h, e) + 1e-12);
  }
}

TEST(Resolved, ZeroTrueColumnThrows) {
  Matrix h = Matrix::Ones(3, 2);
  h.col(1).setZero();
  EXPECT_THROW(nmse_h_resolved(h, Matrix::Ones(3, 2)), NumericError);
}
