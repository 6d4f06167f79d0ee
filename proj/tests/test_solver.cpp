#include <gtest/gtest.h>

#include <sstream>

#include "tenrec/eval.hpp"
#include "tenrec/gradcheck.hpp"
#include "tenrec/solver.hpp"
#include "test_util.hpp"

using namespace tenrec;
using namespace tenrec::testing;

namespace {

SolverContext small_context(std::uint64_t seed, double observe, std::size_t max_iters = 30) {
  const DenseTensor x = random_lowrank({7, 6, 5}, {2, 2, 2}, seed);
  SolverConfig c;
  c.ranks = {2, 2, 2};
  c.max_iters = max_iters;
  c.seed = seed;
  return make_context(x, mask_random(x.dims(), observe, seed + 1), std::nullopt, c);
}

std::size_t zeros(const DenseTensor& t) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) n += t[i] == 0.0;
  return n;
}

}  // namespace

TEST(Solve, ExactLowRankFullyObserved) {
  const DenseTensor x = random_lowrank({6, 6, 6}, {2, 2, 2}, 5);
  SolverConfig c;
  c.ranks = {2, 2, 2};
  c.max_iters = 10;
  const SolveResult r = solve(x, ObservationMask::full(x.dims()), std::nullopt, c);
  EXPECT_LE(r.trace.records.size(), 10u);
  EXPECT_GE(fit(x, tucker_reconstruct(r.model)), 1.0 - 1e-6);
}

TEST(Solve, CompletedKeepsObservedEntries) {
  const SolverContext ctx = small_context(3, 0.5, 5);
  const SolveResult r = solve(ctx);
  for (auto lin : ctx.mask.linear()) EXPECT_EQ(r.completed[lin], ctx.x[lin]);
  for (auto lin : ctx.mask.linear()) EXPECT_EQ(r.xhat[lin], ctx.x[lin]);
  const ObservationMask missing = ctx.mask.complement();
  const DenseTensor model = tucker_reconstruct(r.model);
  for (auto lin : missing.linear())
    EXPECT_NEAR(r.completed[lin], model[lin], 1e-12 * (1.0 + std::abs(model[lin])));
}

TEST(Solve, BlockStepsNeverRaiseLagrangianProperty) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const SolveResult r = solve(small_context(seed, 0.6, 25));
    for (const auto& rec : r.trace.records) EXPECT_LE(rec.max_block_increase, 1e-8) << seed;
  }
}

TEST(Solve, DeterministicForFixedSeed) {
  const SolveResult a = solve(small_context(4, 0.5, 8));
  const SolveResult b = solve(small_context(4, 0.5, 8));
  EXPECT_EQ(a.completed, b.completed);
  std::ostringstream ta, tb;
  write_trace_csv(ta, a.trace);
  write_trace_csv(tb, b.trace);
  EXPECT_EQ(ta.str(), tb.str());
}

TEST(Solve, TraceCsvHeader) {
  std::ostringstream os;
  write_trace_csv(os, solve(small_context(1, 0.5, 2)).trace);
  const std::string header = os.str().substr(0, os.str().find('\n'));
  EXPECT_EQ(header.rfind("iter,", 0), 0u);
  EXPECT_NE(header.find("lagrangian"), std::string::npos);
  EXPECT_NE(header.find("fit"), std::string::npos);
}

TEST(InitialState, BalancingKeepsTheModel) {
  SolverContext ctx = small_context(2, 0.5);
  ctx.config.init_balance = 0.0;
  const SolverState raw = initial_state(ctx);
  ctx.config.init_balance = 1e-4;
  const SolverState bal = initial_state(ctx);
  const DenseTensor zr = tucker_reconstruct({raw.core, raw.factors});
  const DenseTensor zb = tucker_reconstruct({bal.core, bal.factors});
  EXPECT_LT(max_abs_diff(zr, zb), 1e-9 * (1.0 + frobenius_norm(zr)));
  EXPECT_EQ(bal.z, ctx.x_filled);
  for (auto lin : ctx.mask.linear()) EXPECT_EQ(bal.xhat[lin], ctx.x[lin]);
  EXPECT_EQ(squared_norm(bal.y1), 0.0);
}

TEST(Gradients, ZeroStateHasZeroGradients) {
  const DenseTensor x({3, 3, 3});
  SolverConfig c;
  c.ranks = {2, 2, 2};
  const SolverContext ctx = make_context(x, ObservationMask::full(x.dims()), std::nullopt, c);
  SolverState s = initial_state(ctx);
  for (auto& v : s.factors) v.setZero();
  s.core = DenseTensor({2, 2, 2});
  s.z = DenseTensor(x.dims());
  s.xhat = DenseTensor(x.dims());
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(grad_factor(ctx, s, l).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(squared_norm(grad_core(ctx, s)), 0.0);
}

TEST(Gradients, AnalyticMatchesFiniteDifferences) {
  const GradcheckReport r = run_solver_gradcheck(7, 6);
  EXPECT_EQ(r.instances, 6u);
  EXPECT_LE(r.max_error, 1e-6);
}

TEST(Residuals, KroneckerFormMatchesModeProducts) {
  const GradcheckInstance inst = random_instance(3);
  const Residuals r = residuals(inst.ctx, inst.state);
  EXPECT_LT(max_abs_diff(r.a, residual_A(inst.state)), 1e-10 * (1.0 + frobenius_norm(r.a)));
  for (std::size_t l = 0; l < r.b.size(); ++l) {
    const RealMatrix b = residual_B(inst.ctx, inst.state, l);
    EXPECT_LT((b - r.b[l]).cwiseAbs().maxCoeff(), 1e-10 * (1.0 + b.norm()));
  }
}

TEST(Duals, AscentFollowsResiduals) {
  GradcheckInstance inst = random_instance(4);
  const Residuals r = residuals(inst.ctx, inst.state);
  const SolverState before = inst.state;
  update_duals(inst.ctx, inst.state);
  const double rho = inst.ctx.config.rho;
  for (std::size_t i = 0; i < r.a.size(); ++i)
    EXPECT_NEAR(inst.state.y1[i], before.y1[i] - rho * r.a[i], 1e-12 * (1.0 + std::abs(before.y1[i])));
  for (std::size_t l = 0; l < r.b.size(); ++l)
    EXPECT_LT((inst.state.y2[l] - (before.y2[l] - rho * r.b[l])).cwiseAbs().maxCoeff(),
              1e-10 * (1.0 + before.y2[l].norm()));
}

TEST(Lagrangian, CompletedSquareDiffersByConstant) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GradcheckInstance inst = random_instance(seed);
    const LagrangianValue v = augmented_lagrangian(inst.ctx, inst.state);
    EXPECT_NEAR(v.value, v.completed_square - v.constant, 1e-9 * (1.0 + std::abs(v.value)));
  }
}

TEST(LowerObjective, IdentityMetricClosedForm) {
  Gen g(81);
  const DenseTensor x = random_tensor(g, {3, 4, 2});
  SimilarityMatrices s{random_spd(g, 3), random_spd(g, 4), random_spd(g, 2)};
  const std::vector<double> lambda{0.1, 0.2, 0.3};
  double want = 0.5 * squared_norm(x);
  for (std::size_t l = 0; l < 3; ++l) want += 0.5 * lambda[l] * s[l].trace();
  EXPECT_NEAR(lower_objective(x, identity_metric(x.dims()), s, lambda), want, 1e-12 * want);
  EXPECT_LT(max_abs_diff(lower_gradient_xhat(x, identity_metric(x.dims())), x), 1e-14);
}

TEST(Penalties, HugeFactorPenaltyZeroesFactors) {
  SolverContext ctx = small_context(6, 0.5, 5);
  ctx.config.factor_penalties.assign(3, Penalty{PenaltyKind::l1, 1e8});
  const SolverState s = initial_state(ctx);
  for (std::size_t l = 0; l < 3; ++l)
    EXPECT_EQ(update_factor(ctx, s, l, 1.0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Penalties, CoreSparsityGrowsWithWeight) {
  const SolverContext base = small_context(8, 0.7, 10);
  const SolverState s = initial_state(base);
  const DenseTensor plain = update_core(base, s, 1.0);
  double scale = 0.0;
  for (std::size_t i = 0; i < plain.size(); ++i) scale = std::max(scale, std::abs(plain[i]));
  std::size_t last = 0;
  for (double f : {1e-3, 0.3, 2.0}) {
    SolverContext ctx = base;
    ctx.config.core_penalty = Penalty{PenaltyKind::l1, f * scale};
    const std::size_t z = zeros(update_core(ctx, s, 1.0));
    EXPECT_GE(z, last);
    last = z;
  }
  EXPECT_EQ(last, s.core.size());
}

TEST(Lipschitz, QuadraticBlockCurvature) {
  const GradcheckInstance inst = random_instance(5);
  const double lip = estimate_lipschitz(inst.ctx, inst.state, Variable{Variable::core, 0}, 1);
  EXPECT_GT(lip, 0.0);
  EXPECT_TRUE(std::isfinite(lip));
}

TEST(Context, RejectsBadConfig) {
  const DenseTensor x({3, 3});
  SolverConfig c;
  c.ranks = {4, 2};
  EXPECT_THROW(make_context(x, ObservationMask::full(x.dims()), std::nullopt, c), ShapeError);
  c.ranks = {2};
  EXPECT_THROW(make_context(x, ObservationMask::full(x.dims()), std::nullopt, c), ShapeError);
  c.ranks = {2, 2};
  c.rho = 0.0;
  EXPECT_THROW(make_context(x, ObservationMask::full(x.dims()), std::nullopt, c), ShapeError);
}
