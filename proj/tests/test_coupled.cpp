#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "tenrec/coupled.hpp"
#include "tenrec/cp.hpp"
#include "tenrec/linalg.hpp"
#include "test_util.hpp"

using namespace tenrec;
using namespace tenrec::testing;

TEST(CoupledSpec, ParsesBothModeSyntaxes) {
  std::istringstream is("# comment\nsizes: 5 6 7 4\nmodes: {[1 2 3],[1,4]}\nrank: 2\nnoise: 0.1\nseed: 9\n");
  const CoupledSpec s = parse_coupled_spec(is);
  EXPECT_EQ(s.sizes, (std::vector<std::size_t>{5, 6, 7, 4}));
  ASSERT_EQ(s.modes.size(), 2u);
  EXPECT_EQ(s.modes[0], (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(s.modes[1], (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(s.rank, 2u);
  EXPECT_EQ(s.noise, 0.1);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(parse_mode_lists("1 2 3; 1 4"), s.modes);
}

TEST(CoupledSpec, RejectsInvalidSpecs) {
  auto parse = [](const std::string& text) {
    std::istringstream is(text);
    return parse_coupled_spec(is);
  };
  EXPECT_THROW(parse("modes: 1 2\n"), ShapeError);
  EXPECT_THROW(parse("sizes: 3 3\nmodes: 1 1\n"), ShapeError);
  EXPECT_THROW(parse("sizes: 3 3 3\nmodes: 1 2; 1 2\n"), ShapeError);
  EXPECT_THROW(parse("sizes: 3 3 3\nmodes: 1 2; 3 1\n"), ShapeError);
  EXPECT_THROW(parse("sizes: 3 3\nmodes: 1 3\n"), ShapeError);
  EXPECT_THROW(parse("sizes: 3 3\nmodes: 1 2\ncolour: red\n"), ShapeError);
  EXPECT_THROW(parse("sizes 3 3\n"), ShapeError);
}

TEST(CreateCoupled, ShapesAndNoiseLevel) {
  CoupledSpec s;
  s.sizes = {5, 6, 4, 3};
  s.modes = {{1, 2, 3}, {1, 4}};
  s.rank = 2;
  s.noise = 0.1;
  const CoupledProblem p = create_coupled(s);
  EXPECT_EQ(p.tensor.dims(), (Dims{5, 6, 4}));
  ASSERT_EQ(p.couplings.size(), 1u);
  EXPECT_EQ(p.couplings[0].mode, 0u);
  EXPECT_EQ(p.couplings[0].matrix.rows(), 5);
  EXPECT_EQ(p.couplings[0].matrix.cols(), 3);
  EXPECT_NEAR(frobenius_norm(p.tensor - p.clean_tensor) / frobenius_norm(p.clean_tensor), 0.1, 1e-12);
  EXPECT_NEAR((p.couplings[0].matrix - p.clean_matrices[0]).norm() / p.clean_matrices[0].norm(), 0.1,
              1e-12);
  for (const auto& f : *p.ground_truth)
    for (Eigen::Index c = 0; c < f.cols(); ++c) EXPECT_NEAR(f.col(c).norm(), 1.0, 1e-12);
  EXPECT_EQ(create_coupled(s).tensor, p.tensor);
}

TEST(Assignment, MatchesBruteForceProperty) {
  Gen g(71);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 4;
    const RealMatrix cost = random_matrix(g, n, n).cwiseAbs();
    const auto a = min_cost_assignment(cost);
    double got = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) got += cost(i, static_cast<Eigen::Index>(a[i]));
    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += cost(i, perm[i]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_NEAR(got, best, 1e-12);
  }
}

TEST(Congruence, InvariantToPermutationAndSign) {
  Gen g(72);
  const RealMatrix truth = random_matrix(g, 6, 3);
  RealMatrix est(6, 3);
  est.col(0) = -2.0 * truth.col(2);
  est.col(1) = truth.col(0);
  est.col(2) = 0.5 * truth.col(1);
  EXPECT_NEAR(factor_congruence(est, truth), 1.0, 1e-12);
  EXPECT_LT(factor_congruence(random_matrix(g, 6, 3), truth), 1.0);
  EXPECT_THROW(factor_congruence(RealMatrix(5, 3), truth), ShapeError);
}

TEST(Cp, RecoversExactLowRankTensor) {
  Gen g(73);
  std::vector<RealMatrix> f{random_matrix(g, 4, 2), random_matrix(g, 5, 2), random_matrix(g, 3, 2)};
  const CpModel truth{f, Eigen::VectorXd::Ones(2)};
  const DenseTensor x = cp_reconstruct(truth, {4, 5, 3});
  const CpModel est = cp_decompose(x, 2);
  EXPECT_LT(frobenius_norm(cp_reconstruct(est, {4, 5, 3}) - x) / frobenius_norm(x), 1e-6);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_GT(factor_congruence(est.factors[k], f[k]), 1.0 - 1e-6);
}

TEST(CoupledSolve, NoiselessProblemIsRecovered) {
  CoupledSpec s;
  s.sizes = {8, 7, 6, 5};
  s.modes = {{1, 2, 3}, {1, 4}};
  s.rank = 2;
  s.seed = 3;
  const CoupledProblem p = create_coupled(s);
  SolverConfig c;
  c.ranks = {2, 2, 2};
  c.max_iters = 30;
  const CoupledSolution sol = coupled_solve(p, c);
  EXPECT_LT(reconstruction_error(sol, p), 1e-4);
  EXPECT_GT(coupled_congruence(sol, p), 0.999);
  ASSERT_EQ(sol.matrix_residuals.size(), 1u);
  EXPECT_LT(sol.matrix_residuals[0], 1e-4);
}
