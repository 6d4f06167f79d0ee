#include <gtest/gtest.h>

#include "tenrec/kempf_ness.hpp"
#include "tenrec/linalg.hpp"
#include "test_util.hpp"

using namespace tenrec;
using namespace tenrec::testing;

namespace {

double objective(const std::vector<DenseTensor>& xs) {
  double s = 0.0;
  for (const auto& x : xs) s += squared_norm(x);
  return s;
}

std::vector<Eigen::VectorXd> axis_points(double a, double b) {
  // second moment diag(a^2, b^2)
  const double s = std::sqrt(2.0);
  return {Eigen::Vector2d(s * a, 0), Eigen::Vector2d(-s * a, 0), Eigen::Vector2d(0, s * b),
          Eigen::Vector2d(0, -s * b)};
}

}  // namespace

TEST(Whitener, DiagonalSecondMoment) {
  const RealMatrix w = covariance_whitener(axis_points(2.0, 3.0));
  RealMatrix want = RealMatrix::Zero(2, 2);
  want(0, 0) = 0.5;
  want(1, 1) = 1.0 / 3.0;
  EXPECT_LT((w - want).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Whitener, WhitenedInputGivesIdentity) {
  const RealMatrix w = covariance_whitener(axis_points(1.0, 1.0));
  EXPECT_LT((w - RealMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Whitener, TransformedSampleHasIdentityMoment) {
  Rng rng(31);
  const RealMatrix mix = gaussian_matrix(3, 3, rng);
  std::normal_distribution<double> n;
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(mix * Eigen::Vector3d(n(rng), n(rng), n(rng)));
  const RealMatrix w = covariance_whitener(pts);
  RealMatrix m = RealMatrix::Zero(3, 3);
  for (const auto& p : pts) m += (w * p) * (w * p).transpose();
  m /= 200.0;
  EXPECT_LT((m - RealMatrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Whitener, SingularMomentIsRankDeficiency) {
  std::vector<Eigen::VectorXd> pts{Eigen::Vector2d(1, 1), Eigen::Vector2d(2, 2)};
  EXPECT_THROW(covariance_whitener(pts), RankDeficiencyError);
}

TEST(NormalizeCoordinates, FixedPointNeedsOneSweep) {
  // every unfolding of this tensor has Gram proportional to I
  DenseTensor x({2, 2, 2});
  std::vector<std::size_t> a{0, 0, 0}, b{1, 1, 1}, c{0, 1, 1}, d{1, 0, 0};
  x.at(a) = 1.0;
  x.at(b) = 1.0;
  x.at(c) = 1.0;
  x.at(d) = -1.0;
  const auto r = normalize_coordinates({x}, 0.1, 10);
  EXPECT_EQ(r.sweeps, 1u);
  for (const auto& u : r.transforms) EXPECT_LT((u - RealMatrix::Identity(2, 2)).norm(), 1e-8);
}

TEST(NormalizeCoordinates, DiagonalStretchDropsObjective) {
  Gen g(32);
  DenseTensor x = random_tensor(g, {2, 3, 3});
  RealMatrix stretch = RealMatrix::Zero(2, 2);
  stretch(0, 0) = 4.0;
  stretch(1, 1) = 0.25;
  x = mode_product(x, stretch, 0);
  const auto r = normalize_coordinates({x}, 1e-3, 50);
  ASSERT_GE(r.objective_trace.size(), 2u);
  EXPECT_LT(r.objective_trace[1], r.objective_trace[0]);
}

TEST(NormalizeCoordinates, DeterminantOneAndMonotoneProperty) {
  Gen g(33);
  for (int trial = 0; trial < 10; ++trial) {
    const Dims dims = random_dims(g, 3, 2, 4);
    std::vector<DenseTensor> xs{random_tensor(g, dims), random_tensor(g, dims)};
    const auto r = normalize_coordinates(xs, 1e-6, 200);
    for (const auto& u : r.transforms) EXPECT_NEAR(u.determinant(), 1.0, 1e-8);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] * (1.0 + 1e-10));
    for (std::size_t i = 0; i < xs.size(); ++i)
      EXPECT_LT(max_abs_diff(multi_mode_product(xs[i], r.transforms), r.normalized[i]), 1e-10);
  }
}

TEST(NormalizeCoordinates, StationaryAfterConvergence) {
  Gen g(34);
  const DenseTensor x = random_tensor(g, {4, 4, 4});
  const auto r = normalize_coordinates({x}, 1e-15, 5000);
  EXPECT_LT(kempf_ness_gradient(r.normalized), 1e-6);
}

TEST(NormalizeCoordinates, RestartsReachTheSameMinimum) {
  Gen g(35);
  Rng rng(35);
  for (int inst = 0; inst < 5; ++inst) {
    const DenseTensor x = random_tensor(g, {3, 3, 3});
    std::vector<double> finals;
    for (int restart = 0; restart < 5; ++restart) {
      std::vector<RealMatrix> start;
      for (int k = 0; k < 3; ++k) start.push_back(random_special_linear(3, rng));
      const auto r = normalize_coordinates({multi_mode_product(x, start)}, 1e-15, 5000);
      finals.push_back(r.objective_trace.back());
    }
    for (double f : finals) EXPECT_NEAR(f, finals.front(), 1e-6 * finals.front());
  }
}

TEST(NormalizeCoordinates, RejectsBadInput) {
  EXPECT_THROW(normalize_coordinates({}, 0.1, 5), ShapeError);
  Gen g(36);
  const DenseTensor x = random_tensor(g, {2, 2});
  EXPECT_THROW(normalize_coordinates({x}, 0.0, 5), ShapeError);
  EXPECT_THROW(normalize_coordinates({x}, 1.0, 5), ShapeError);
  EXPECT_THROW(normalize_coordinates({x, random_tensor(g, {2, 3})}, 0.5, 5), ShapeError);
  EXPECT_THROW(normalize_coordinates({DenseTensor({2, 2})}, 0.5, 5), NumericError);
}

TEST(KempfNessGradient, ZeroAtNormalizedPointOnly) {
  Gen g(37);
  const DenseTensor x = random_tensor(g, {3, 4, 2});
  RealMatrix stretch = RealMatrix::Identity(4, 4);
  stretch(0, 0) = 3.0;
  stretch(3, 3) = 1.0 / 3.0;
  EXPECT_GT(kempf_ness_gradient({mode_product(x, stretch, 1)}), 1e-2);
  const auto r = normalize_coordinates({x}, 1e-15, 5000);
  EXPECT_LT(kempf_ness_gradient(r.normalized), 1e-6);
}

TEST(DetNormalizedInvSqrt, DeterminantAndErrors) {
  Gen g(38);
  const RealMatrix c = random_spd(g, 4);
  const RealMatrix l = det_normalized_inv_sqrt(c, "test");
  EXPECT_NEAR(l.determinant(), 1.0, 1e-8);
  const RealMatrix q = l * c * l;
  EXPECT_LT((q / q(0, 0) - RealMatrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_THROW(det_normalized_inv_sqrt(-RealMatrix::Identity(2, 2), "neg"), ConditioningError);
  RealMatrix indef = RealMatrix::Identity(2, 2);
  indef(1, 1) = -0.5;
  EXPECT_THROW(det_normalized_inv_sqrt(indef, "indefinite"), ConditioningError);
}

TEST(DmlFactors, EmptyMaskSendsMatrixToZero) {
  const RealMatrix s = RealMatrix::Identity(3, 3);
  const ObservationMask none = ObservationMask::from_linear({3, 3}, {});
  const auto r = dml_factors(RealMatrix::Ones(3, 3), s, s, none, {}, 1.0, 1.0, 5);
  EXPECT_LT(r.m.norm(), 1e-12);
  EXPECT_LT((r.lx - RealMatrix::Identity(3, 3)).norm(), 1e-10);
  EXPECT_LT((r.ly - RealMatrix::Identity(3, 3)).norm(), 1e-10);
}

TEST(DmlFactors, FullyObservedKeepsData) {
  Gen g(39);
  const RealMatrix m = random_matrix(g, 3, 4);
  const ObservationMask all = ObservationMask::full({3, 4});
  std::vector<double> values;
  for (auto lin : all.linear()) values.push_back(m(lin / 4, lin % 4));
  const auto r = dml_factors(RealMatrix::Zero(3, 4), random_spd(g, 3), random_spd(g, 4), all,
                             values, 0.5, 0.5, 4);
  EXPECT_LT((r.m - m).norm(), 1e-14);
  EXPECT_NEAR(r.lx.determinant(), 1.0, 1e-8);
  EXPECT_NEAR(r.ly.determinant(), 1.0, 1e-8);
}

TEST(DmlFactors, HalfObservedObjectiveMonotoneProperty) {
  Gen g(40);
  for (int trial = 0; trial < 10; ++trial) {
    const RealMatrix truth = random_matrix(g, 4, 4);
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < 16; ++i)
      if ((i * 7 + static_cast<std::size_t>(trial)) % 2 == 0) cells.push_back(i);
    const ObservationMask mask = ObservationMask::from_linear({4, 4}, cells);
    std::vector<double> values;
    for (auto lin : mask.linear()) values.push_back(truth(lin / 4, lin % 4));
    const auto r = dml_factors(RealMatrix::Zero(4, 4), random_spd(g, 4), random_spd(g, 4), mask,
                               values, 0.3, 0.7, 15);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-10 * r.objective_trace[0]);
    EXPECT_NEAR(r.lx.determinant(), 1.0, 1e-8);
    EXPECT_NEAR(r.ly.determinant(), 1.0, 1e-8);
    for (std::size_t a = 0; a < values.size(); ++a)
      EXPECT_EQ(r.m(mask.linear()[a] / 4, mask.linear()[a] % 4), values[a]);
  }
}

TEST(DmlFactors, RejectsBadArguments) {
  const RealMatrix s = RealMatrix::Identity(2, 2);
  const ObservationMask none = ObservationMask::from_linear({2, 2}, {});
  EXPECT_THROW(dml_factors(RealMatrix::Zero(2, 2), s, s, none, {}, 0.0, 1.0, 1), ShapeError);
  EXPECT_THROW(dml_factors(RealMatrix::Zero(2, 2), RealMatrix::Identity(3, 3), s, none, {}, 1.0, 1.0, 1),
               ShapeError);
  EXPECT_THROW(dml_factors(RealMatrix::Zero(2, 2), s, s, none, {1.0}, 1.0, 1.0, 1), ShapeError);
}

TEST(DmlSweepTensor, UnitDeterminantFactors) {
  Gen g(41);
  const DenseTensor x = random_tensor(g, {3, 4, 2});
  SimilarityMatrices s{random_spd(g, 3), random_spd(g, 4), random_spd(g, 2)};
  const MetricFamily m = dml_sweep_tensor(x, s, {0.1, 0.1, 0.1}, identity_metric(x.dims()));
  for (const auto& l : m.mats) EXPECT_NEAR(l.determinant(), 1.0, 1e-8);
  EXPECT_THROW(dml_sweep_tensor(x, {s[0]}, {0.1}, identity_metric(x.dims())), ShapeError);
}
