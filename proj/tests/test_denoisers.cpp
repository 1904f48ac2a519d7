#include <gtest/gtest.h>

#include <random>

#include "uampmf/denoisers.hpp"

using namespace uampmf;

namespace {

PseudoObservationField scalar(double q, double v) {
  return {Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, v)};
}

PseudoObservationField random_field(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_real_distribution<double> lv(-3.0, 3.0);
  PseudoObservationField f{Matrix(r, c), Matrix(r, c)};
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) {
      f.q(i, j) = g(rng);
      f.v(i, j) = std::pow(10.0, lv(rng));
    }
  return f;
}

GaussianGammaPrior gg_with(double gamma, Index r = 1, Index c = 1) {
  GaussianGammaPrior p;
  p.precision = Matrix::Constant(r, c, gamma);
  return p;
}

}  // namespace

// Reference moments below come from adaptive quadrature of the posterior.

TEST(GaussianGamma, ZeroPrecisionIsFlat) {
  const DenoisedField d = Denoiser(gg_with(0.0)).denoise(scalar(3.0, 2.0));
  EXPECT_DOUBLE_EQ(d.mean(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(d.var(0, 0), 2.0);
}

TEST(GaussianGamma, UnitPrecision) {
  const DenoisedField d = Denoiser(gg_with(1.0)).denoise(scalar(2.0, 1.0));
  EXPECT_NEAR(d.mean(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(d.var(0, 0), 0.5, 1e-15);
}

TEST(NonNegativeGaussian, RectifiedPosteriorAtOrigin) {
  const DenoisedField d = Denoiser(NonNegativeGaussianPrior{0.0, 1.0}).denoise(scalar(0.0, 1.0));
  EXPECT_GT(d.mean(0, 0), 0.0);
  EXPECT_NEAR(d.mean(0, 0), 0.5641895835477565, 1e-12);
  EXPECT_NEAR(d.var(0, 0), 0.18169011381620936, 1e-12);
}

TEST(NonNegativeGaussian, ShiftedLocation) {
  const DenoisedField d = Denoiser(NonNegativeGaussianPrior{1.5, 0.5}).denoise(scalar(-2.0, 0.3));
  EXPECT_NEAR(d.mean(0, 0), 0.18440865322102815, 1e-11);
  EXPECT_NEAR(d.var(0, 0), 0.026712499527749817, 1e-11);
}

TEST(NonNegativeGaussian, DeepTailUsesStableBranch) {
  const DenoisedField d = Denoiser(NonNegativeGaussianPrior{0.0, 1.0}).denoise(scalar(-10.0, 1e-3));
  EXPECT_NEAR(d.mean(0, 0) / 9.9997998100193896e-05, 1.0, 1e-9);
  EXPECT_NEAR(d.var(0, 0) / 9.9993994500948924e-09, 1.0, 1e-8);
}

TEST(KnownEntries, MaskedEntriesArePinned) {
  Mask mask(2, 2);
  mask << true, false, false, true;
  KnownEntriesPrior k{Matrix::Constant(2, 2, 5.0), mask};
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const PseudoObservationField f = random_field(2, 2, rng);
    const DenoisedField d = Denoiser(k).denoise(f);
    EXPECT_EQ(d.mean(0, 0), 5.0);
    EXPECT_EQ(d.var(0, 0), 0.0);
    EXPECT_EQ(d.mean(1, 1), 5.0);
    EXPECT_EQ(d.var(1, 1), 0.0);
    // Unmasked entries pass the observation through.
    EXPECT_EQ(d.mean(0, 1), f.q(0, 1));
    EXPECT_EQ(d.var(1, 0), f.v(1, 0));
  }
}

TEST(BernoulliNonNeg, HalfRateReference) {
  const DenoisedField d =
      denoise_bernoulli_gaussian_nonneg({0.5, 0.0, 1.0, false}, scalar(1.0, 1.0));
  EXPECT_NEAR(d.mean(0, 0), 0.45754817941023723, 1e-11);
  EXPECT_NEAR(d.var(0, 0), 0.30938625802572894, 1e-11);
}

TEST(BernoulliNonNeg, SparseShiftedReference) {
  const DenoisedField d =
      denoise_bernoulli_gaussian_nonneg({0.1, 1.0, 2.0, false}, scalar(3.0, 0.5));
  EXPECT_NEAR(d.mean(0, 0), 2.5891737203248941, 1e-11);
  EXPECT_NEAR(d.var(0, 0), 0.42635726885450964, 1e-11);
}

TEST(BernoulliNonNeg, RateLimits) {
  std::mt19937_64 rng(11);
  const PseudoObservationField f = random_field(4, 5, rng);
  const DenoisedField dense = denoise_bernoulli_gaussian_nonneg({1.0 - 1e-15, 0.3, 1.2, false}, f);
  const DenoisedField nn = Denoiser(NonNegativeGaussianPrior{0.3, 1.2}).denoise(f);
  EXPECT_LT((dense.mean - nn.mean).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((dense.var - nn.var).cwiseAbs().maxCoeff(), 1e-9);
  const DenoisedField spike = denoise_bernoulli_gaussian_nonneg({1e-300, 0.3, 1.2, false}, f);
  EXPECT_LT(spike.mean.cwiseAbs().maxCoeff(), 1e-200);
  EXPECT_LT(spike.var.cwiseAbs().maxCoeff(), 1e-200);
}

TEST(BernoulliNonNeg, ExtremeInputsStayFinite) {
  PseudoObservationField f{Matrix(1, 4), Matrix(1, 4)};
  f.q << 1e6, -1e6, 40.0, 0.0;
  f.v << 1e-6, 1e-6, 1e-8, 1e8;
  const DenoisedField d = denoise_bernoulli_gaussian_nonneg({1e-9, 0.0, 1.0, false}, f);
  EXPECT_TRUE(d.mean.allFinite());
  EXPECT_TRUE(d.var.allFinite());
  EXPECT_GE(d.var.minCoeff(), 0.0);
}

TEST(BernoulliNonNeg, RejectsInvalidRate) {
  EXPECT_THROW(denoise_bernoulli_gaussian_nonneg({0.0, 0.0, 1.0, false}, scalar(1, 1)), NumericError);
  EXPECT_THROW(denoise_bernoulli_gaussian_nonneg({1.0, 0.0, 1.0, false}, scalar(1, 1)), NumericError);
}

TEST(UpdateGamma, ClosedFormValues) {
  DenoisedField post{Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0)};
  EXPECT_DOUBLE_EQ(update_gamma(post, 0.0, 0.0)(0, 0), 0.5);
  post = {Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  EXPECT_DOUBLE_EQ(update_gamma(post, 0.5, 1.0)(0, 0), 1.0);
}

TEST(UpdateGamma, ZeroEnergyClamps) {
  const DenoisedField post{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  const Matrix g = update_gamma(post, 0.0, 0.0);
  EXPECT_TRUE((g.array() == kGammaCeiling).all());
  const DenoisedField huge{Matrix::Constant(1, 1, 1e10), Matrix::Zero(1, 1)};
  EXPECT_EQ(update_gamma(huge, 0.0, 0.0)(0, 0), kGammaFloor);
}

TEST(UpdateGamma, MonotoneInSecondMoment) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 200; ++t) {
    const double e1 = u(rng), e2 = e1 + u(rng);
    const double g1 = update_gamma({Matrix::Zero(1, 1), Matrix::Constant(1, 1, e1)}, 0.3, 0.2)(0, 0);
    const double g2 = update_gamma({Matrix::Zero(1, 1), Matrix::Constant(1, 1, e2)}, 0.3, 0.2)(0, 0);
    EXPECT_LE(g2, g1);
  }
}

TEST(UpdateGamma, RowSharedBroadcastsRowMean) {
  Matrix mean(2, 3), var = Matrix::Zero(2, 3);
  mean << 1, 2, 3, 0, 0, 3;
  const Matrix g = update_gamma({mean, var}, 0.0, 0.0, true);
  EXPECT_DOUBLE_EQ(g(0, 0), 3.0 / 14.0);
  EXPECT_DOUBLE_EQ(g(0, 2), 3.0 / 14.0);
  EXPECT_DOUBLE_EQ(g(1, 1), 1.0 / 3.0);
}

TEST(UpdateAlpha, ConjugateValues) {
  auto [alpha, post] = update_alpha(scalar(2.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(post.mean(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(post.var(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(alpha, 1.5);
  auto [alpha_flat, flat] = update_alpha(scalar(2.0, 1.0), 1e12);
  EXPECT_NEAR(flat.mean(0, 0), 2.0, 1e-11);
  EXPECT_NEAR(flat.var(0, 0), 1.0, 1e-11);
  (void)alpha_flat;
}

TEST(UpdateAlpha, DegenerateBlockHitsFloor) {
  auto [alpha, post] = update_alpha(
      {Matrix::Zero(3, 3), Matrix::Constant(3, 3, 1e-300)}, 1.0);
  EXPECT_EQ(alpha, kAlphaFloor);
  EXPECT_THROW(update_alpha(scalar(1.0, 1.0), 0.0), NumericError);
  EXPECT_THROW(update_alpha({Matrix(0, 0), Matrix(0, 0)}, 1.0), DimensionError);
}

TEST(GaussianPrior, LearnedVarianceIsMeanSecondMoment) {
  Denoiser d = GaussianPrior{0.0, 1.0, true};
  const PseudoObservationField f{(Matrix(1, 2) << 2.0, 0.0).finished(), Matrix::Ones(1, 2)};
  const DenoisedField post = d.denoise(f);
  d.learn(f, post);
  // Posterior (1, 0.5) and (0, 0.5): second moments 1.5 and 0.5.
  EXPECT_DOUBLE_EQ(d.get<GaussianPrior>()->variance.scalar(), 1.0);
}

TEST(Symmetry, GaussianFamiliesAreOdd) {
  std::mt19937_64 rng(9);
  const PseudoObservationField f = random_field(5, 7, rng);
  const PseudoObservationField neg{-f.q, f.v};
  for (const Denoiser& d :
       {Denoiser(GaussianPrior{0.0, 2.0, false}), Denoiser(gg_with(0.3, 5, 7)), Denoiser(gg_with(0.0, 5, 7))}) {
    const DenoisedField a = d.denoise(f), b = d.denoise(neg);
    EXPECT_EQ(a.mean, -b.mean);
    EXPECT_EQ(a.var, b.var);
  }
}

TEST(Property, PosteriorVarianceBelowChannelVariance) {
  std::mt19937_64 rng(21);
  const PseudoObservationField f = random_field(30, 30, rng);
  for (const Denoiser& d : {Denoiser(GaussianPrior{0.5, 2.0, false}), Denoiser(gg_with(0.7, 30, 30)),
                            Denoiser(NonNegativeGaussianPrior{0.0, 1.0}),
                            Denoiser(NonNegativeGaussianPrior{-3.0, 0.2})}) {
    const DenoisedField out = d.denoise(f);
    EXPECT_TRUE(out.var.allFinite());
    EXPECT_GE(out.var.minCoeff(), 0.0);
    EXPECT_TRUE((out.var.array() <= f.v.array() * (1.0 + 1e-12)).all());
  }
}

TEST(Block, EqualsConcatenationOfParts) {
  std::mt19937_64 rng(4);
  const PseudoObservationField f = random_field(6, 9, rng);
  const Denoiser a = NonNegativeGaussianPrior{0.2, 1.0};
  const Denoiser b = gg_with(2.0, 6, 5);
  const Denoiser whole = make_block_prior(BlockAxis::kColumns, {{4, a}, {5, b}});
  const DenoisedField out = whole.denoise(f);
  const DenoisedField left = a.denoise({f.q.leftCols(4), f.v.leftCols(4)});
  const DenoisedField right = b.denoise({f.q.rightCols(5), f.v.rightCols(5)});
  EXPECT_EQ(out.mean.leftCols(4), left.mean);
  EXPECT_EQ(out.var.rightCols(5), right.var);
  EXPECT_EQ(out.mean.rightCols(5), right.mean);

  const Denoiser rows = make_block_prior(BlockAxis::kRows, {{2, a}, {4, GaussianPrior{0.0, 1.0, false}}});
  const DenoisedField r = rows.denoise(f);
  EXPECT_EQ(r.mean.topRows(2), a.denoise({f.q.topRows(2), f.v.topRows(2)}).mean);
}

TEST(Block, RangesMustPartition) {
  BlockPrior gap{BlockAxis::kColumns, {{0, 2, GaussianPrior{}}, {3, 5, GaussianPrior{}}}};
  std::mt19937_64 rng(1);
  EXPECT_THROW(Denoiser(gap).denoise(random_field(2, 5, rng)), DimensionError);
  BlockPrior overlap{BlockAxis::kColumns, {{0, 3, GaussianPrior{}}, {2, 5, GaussianPrior{}}}};
  EXPECT_THROW(Denoiser(overlap).denoise(random_field(2, 5, rng)), DimensionError);
}

TEST(Validation, RejectsBadFields) {
  const Denoiser d = GaussianPrior{};
  EXPECT_THROW(d.denoise({Matrix::Zero(2, 2), Matrix::Ones(2, 3)}), DimensionError);
  EXPECT_THROW(d.denoise(scalar(1.0, 0.0)), NumericError);
  EXPECT_THROW(d.denoise(scalar(1.0, -1.0)), NumericError);
  EXPECT_THROW(d.denoise(scalar(std::nan(""), 1.0)), NumericError);
  EXPECT_THROW(Denoiser(gg_with(1.0, 2, 2)).denoise(scalar(1.0, 1.0)), DimensionError);
}

TEST(Learning, GaussianGammaPrecisionIsRefreshed) {
  Denoiser d = GaussianGammaPrior{};
  const PseudoObservationField f{Matrix::Constant(2, 2, 3.0), Matrix::Constant(2, 2, 1.0)};
  const DenoisedField post = d.denoise(f);
  d.learn(f, post);
  const Matrix& g = d.get<GaussianGammaPrior>()->precision;
  EXPECT_DOUBLE_EQ(g(0, 0), 1.0 / (post.var(0, 0) + post.mean(0, 0) * post.mean(0, 0)));
}

TEST(Learning, BernoulliRateTracksResponsibility) {
  Denoiser d = BernoulliNonNegPrior{0.5, 0.0, 1.0, true};
  PseudoObservationField f{Matrix::Zero(1, 10), Matrix::Constant(1, 10, 1e-8)};
  f.q(0, 0) = 2.0;
  const DenoisedField post = d.denoise(f);
  d.learn(f, post);
  EXPECT_NEAR(d.get<BernoulliNonNegPrior>()->rate, 0.1, 1e-3);
}
