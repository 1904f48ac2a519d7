#include <gtest/gtest.h>

#include <algorithm>

#include "uampmf/applications.hpp"
#include "uampmf/experiment.hpp"
#include "uampmf/metrics.hpp"

using namespace uampmf;

TEST(Rpca, BlockStructure) {
  RpcaSpec s;
  s.m = 4, s.l = 6, s.rank = 2;
  const FactorizationProblem p = build_rpca(s, Matrix::Zero(4, 6));
  EXPECT_EQ(p.n_inner, 6);
  const BlockPrior* hb = p.h_prior.get<BlockPrior>();
  ASSERT_NE(hb, nullptr);
  EXPECT_EQ(hb->axis, BlockAxis::kColumns);
  ASSERT_EQ(hb->blocks.size(), 2u);
  EXPECT_EQ(hb->blocks[0].end, 2);
  EXPECT_EQ(hb->blocks[1].end, 6);
  const KnownEntriesPrior* known = hb->blocks[1].prior.get<KnownEntriesPrior>();
  ASSERT_NE(known, nullptr);
  EXPECT_EQ(known->values, Matrix::Identity(4, 4));
  const BlockPrior* xb = p.x_prior.get<BlockPrior>();
  ASSERT_NE(xb, nullptr);
  EXPECT_EQ(xb->axis, BlockAxis::kRows);
  EXPECT_NE(xb->blocks[0].prior.get<GaussianPrior>(), nullptr);
  EXPECT_NE(xb->blocks[1].prior.get<GaussianGammaPrior>(), nullptr);
}

TEST(Rpca, IdentityBlockIsPinnedThroughoutSolve) {
  Rng rng(1);
  RpcaSpec s;
  s.m = 6, s.l = 8, s.rank = 1;
  const Instance inst = make_instance(s, 40.0, rng);
  FactorizationProblem p = build_rpca(s, inst.y);
  p.options.max_iters = 5;
  p.options.restarts = 0;
  const SolveResult r = solve(p);
  EXPECT_EQ(r.h.rightCols(6), Matrix::Identity(6, 6));
  EXPECT_EQ(rpca_low_rank(r, 1).rows(), 6);
  EXPECT_EQ(rpca_outliers(r, 1).rows(), 6);
}

TEST(Rpca, SizeBudget) {
  RpcaSpec s;
  s.m = 10, s.l = 10, s.rank = 2, s.max_inner = 11;
  EXPECT_THROW(build_rpca(s, Matrix::Zero(10, 10)), std::invalid_argument);
}

TEST(Builders, PriorKinds) {
  const Matrix y = Matrix::Ones(5, 7);
  const FactorizationProblem nmf = build_nmf({5, 2, 7, 0.0, 1.0}, y);
  EXPECT_NE(nmf.h_prior.get<NonNegativeGaussianPrior>(), nullptr);
  EXPECT_NE(nmf.x_prior.get<NonNegativeGaussianPrior>(), nullptr);
  const FactorizationProblem smf = build_sparse_mf({5, 2, 7, 0.2, 0.0, 0.0}, y);
  EXPECT_NE(smf.h_prior.get<GaussianGammaPrior>(), nullptr);
  EXPECT_NE(smf.x_prior.get<GaussianGammaPrior>(), nullptr);
  const FactorizationProblem snmf = build_sparse_nmf({5, 2, 7, 0.3, 0.0, 1.0}, y);
  EXPECT_DOUBLE_EQ(snmf.h_prior.get<BernoulliNonNegPrior>()->rate, 0.3);
  const FactorizationProblem dl = build_dl({5, 2, 7, 1, 0.0, 0.0, 0.0}, y);
  EXPECT_NE(dl.h_prior.get<GaussianPrior>(), nullptr);
  EXPECT_NE(dl.x_prior.get<GaussianGammaPrior>(), nullptr);
}

TEST(Builders, InvalidInputs) {
  const Matrix y = Matrix::Ones(5, 7);
  EXPECT_THROW(build_nmf({5, 2, 6, 0.0, 1.0}, y), DimensionError);
  EXPECT_THROW(build_nmf({5, 2, 7, 0.0, 0.0}, y), std::invalid_argument);
  EXPECT_THROW(build_sparse_nmf({5, 2, 7, 1.0, 0.0, 1.0}, y), std::invalid_argument);
  EXPECT_THROW(build_dl({5, 0, 7, 1, 0.0, 0.0, 0.0}, y), std::invalid_argument);
  const CsmuSpec c{5, 2, 7, 1, 0.01, false, 0.0, 0.0, 0.0};
  EXPECT_THROW(build_csmu(c, y, std::nullopt), std::invalid_argument);
  EXPECT_THROW(build_csmu(c, y, Matrix(Matrix::Ones(5, 3))), DimensionError);
  CsmuSpec neg = c;
  neg.nu = -1.0;
  EXPECT_THROW(build_csmu(neg, y, Matrix(Matrix::Ones(5, 2))), std::invalid_argument);
}

TEST(Csmu, KnownPartCentresThePrior) {
  Rng rng(2);
  const CsmuSpec s{6, 4, 5, 1, 0.0, false, 0.0, 0.0, 0.0};
  const Instance inst = make_instance(s, 50.0, rng);
  ASSERT_TRUE(inst.h_bar.has_value());
  EXPECT_EQ(inst.h, *inst.h_bar);  // nu = 0 leaves no perturbation
  const FactorizationProblem p = build_csmu(s, inst.y, inst.h_bar);
  const GaussianPrior* g = p.h_prior.get<GaussianPrior>();
  ASSERT_NE(g, nullptr);
}

TEST(Csmu, CommonSupportSharesRows) {
  Rng rng(3);
  const CsmuSpec s{8, 10, 12, 3, 0.01, true, 0.0, 0.0, 0.0};
  const Instance inst = make_instance(s, 50.0, rng);
  int active = 0;
  for (Index i = 0; i < 10; ++i) {
    const Index nz = (inst.x.row(i).array() != 0.0).count();
    EXPECT_TRUE(nz == 0 || nz == 12);
    active += nz > 0;
  }
  EXPECT_EQ(active, 3);
}

TEST(Instances, RpcaSignalIncludesOutliers) {
  Rng rng(4);
  RpcaSpec s;
  s.m = 10, s.l = 12, s.rank = 2, s.outlier_rate = 0.2;
  const Instance inst = make_instance(s, std::numeric_limits<double>::infinity(), rng);
  EXPECT_EQ(inst.z, inst.h * inst.x);
  EXPECT_EQ(inst.y, inst.z + inst.e);
}

TEST(Instances, BuildingDoesNotTouchTheObservation) {
  Rng rng(5);
  const ApplicationSpec app = NmfSpec{8, 2, 9, 0.0, 1.0};
  const Instance inst = make_instance(app, 30.0, rng);
  const Matrix before = inst.y;
  FactorizationProblem p = build_problem(app, inst);
  p.options.max_iters = 5;
  p.options.restarts = 0;
  const SolveResult a = solve(p);
  const SolveResult b = solve(p);
  EXPECT_EQ(inst.y, before);
  EXPECT_EQ(p.y, before);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.x, b.x);
}

namespace {

RpcaSpec desk_rpca(double delta) {
  RpcaSpec s;
  s.m = 80, s.l = 80, s.rank = 10, s.outlier_rate = delta;
  return s;
}

SolverOptions desk_options() {
  SolverOptions o;
  o.max_iters = 200;
  o.restarts = 0;
  return o;
}

}  // namespace

TEST(RpcaDesk, NoOutliersLeavesOutlierBlockEmpty) {
  Rng rng(11);
  const RpcaSpec s = desk_rpca(0.0);
  const Instance inst = make_instance(s, std::numeric_limits<double>::infinity(), rng);
  const SolveResult r = solve(build_rpca(s, inst.y), desk_options());
  EXPECT_LE(rpca_outliers(r, s.rank).squaredNorm() / inst.z.squaredNorm(), 1e-6);
}

TEST(RpcaDesk, MatchesPureLowRankWithoutOutliers) {
  Rng rng(12);
  const RpcaSpec s = desk_rpca(0.0);
  const Instance inst = make_instance(s, 60.0, rng);
  const SolveResult full = solve(build_rpca(s, inst.y), desk_options());
  const SolveResult low = solve(build_low_rank(s, inst.y), desk_options());
  const double a = nmse_db(inst.z, rpca_low_rank(full, s.rank));
  const double b = nmse_db(inst.z, low.h * low.x);
  EXPECT_NEAR(std::pow(10.0, a / 10.0), std::pow(10.0, b / 10.0), 1e-4);
}

TEST(RpcaDesk, MedianIterationsWithinBudget) {
  std::vector<int> iters;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const RpcaSpec s = desk_rpca(0.1);
    const Instance inst = make_instance(s, 60.0, rng);
    const SolverOptions o = desk_options();
    const SolveResult r = solve(build_rpca(s, inst.y), o);
    iters.push_back(r.converged ? r.iterations : o.max_iters + 1);
  }
  std::sort(iters.begin(), iters.end());
  EXPECT_LE(iters[4], 200);
}
