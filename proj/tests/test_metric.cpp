#include <gtest/gtest.h>

#include "tenrec/linalg.hpp"
#include "tenrec/metric.hpp"
#include "test_util.hpp"

using namespace tenrec;
using namespace tenrec::testing;

namespace {

MetricFamily random_metric(Gen& g, const Dims& dims) {
  MetricFamily m;
  for (auto n : dims) m.mats.push_back(random_matrix(g, n, n));
  return m;
}

}  // namespace

TEST(Mahalanobis, CoincidenceAndSymmetry) {
  Gen g(21);
  const DenseTensor a = random_tensor(g, {3, 3, 3}), b = random_tensor(g, {3, 3, 3});
  const MetricFamily m = random_metric(g, a.dims());
  EXPECT_EQ(mahalanobis_distance(a, a, m), 0.0);
  EXPECT_EQ(mahalanobis_distance(a, b, m), mahalanobis_distance(b, a, m));
  EXPECT_GE(mahalanobis_distance(a, b, m), 0.0);
}

TEST(Mahalanobis, OrthogonalMetricIsEuclidean) {
  Gen g(22);
  Rng rng(22);
  const DenseTensor a = random_tensor(g, {4, 3, 5}), b = random_tensor(g, {4, 3, 5});
  MetricFamily m;
  for (auto n : a.dims()) m.mats.push_back(random_orthogonal(static_cast<Eigen::Index>(n), rng));
  const double euclid = squared_norm(a - b);
  EXPECT_NEAR(mahalanobis_distance(a, b, m), euclid, 1e-10 * euclid);
}

TEST(Mahalanobis, TraceFormMatchesTransformFormEveryMode) {
  Gen g(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Dims dims = random_dims(g, 2 + trial % 3, 1, 5);
    const DenseTensor a = random_tensor(g, dims), b = random_tensor(g, dims);
    const MetricFamily m = random_metric(g, dims);
    const double d = mahalanobis_distance(a, b, m);
    for (std::size_t l = 0; l < dims.size(); ++l)
      EXPECT_NEAR(mahalanobis_via_trace(a, b, m, l), d, 1e-10 * d) << "mode " << l;
  }
}

TEST(Mahalanobis, TraceFormLargeCompositePath) {
  Gen g(24);
  const Dims dims{3, 70, 70};
  const DenseTensor a = random_tensor(g, dims), b = random_tensor(g, dims);
  const MetricFamily m = random_metric(g, dims);
  const double d = mahalanobis_distance(a, b, m);
  EXPECT_NEAR(mahalanobis_via_trace(a, b, m, 0), d, 1e-10 * d);
}

TEST(Mahalanobis, TriangleInequalityProperty) {
  Gen g(25);
  for (int trial = 0; trial < 30; ++trial) {
    const Dims dims = random_dims(g, 3, 1, 4);
    const DenseTensor a = random_tensor(g, dims), b = random_tensor(g, dims), c = random_tensor(g, dims);
    const MetricFamily m = random_metric(g, dims);
    EXPECT_LE(std::sqrt(mahalanobis_distance(a, c, m)),
              std::sqrt(mahalanobis_distance(a, b, m)) + std::sqrt(mahalanobis_distance(b, c, m)) +
                  1e-9);
  }
}

TEST(Mahalanobis, RejectsShapeMismatch) {
  Gen g(26);
  const DenseTensor a = random_tensor(g, {2, 3}), b = random_tensor(g, {3, 2});
  EXPECT_THROW(mahalanobis_distance(a, b, identity_metric(a.dims())), ShapeError);
  EXPECT_THROW(mahalanobis_distance(a, a, identity_metric({2, 2})), ShapeError);
}

TEST(MetricFromFactors, GramOfFactors) {
  Gen g(27);
  const RealMatrix v = random_matrix(g, 5, 3);
  const MetricFamily m = metric_from_factors({v});
  const RealMatrix want = v * v.transpose();
  EXPECT_LT((m.mats[0] - want).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((m.mats[0] - m.mats[0].transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(m.pseudo);
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(m.mats[0]);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);

  Rng rng(27);
  const RealMatrix q = random_orthogonal(6, rng).leftCols(2);
  const RealMatrix p = metric_from_factors({q}).mats[0];
  EXPECT_LT((p * p - p).norm(), 1e-12);
  EXPECT_EQ(metric_from_factors({RealMatrix::Zero(4, 2)}).mats[0], RealMatrix::Zero(4, 4));
}

TEST(Similarity, MatchesDoubleLoopOracle) {
  Gen g(28);
  const DenseTensor x = random_tensor(g, {4, 3, 2});
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t n = x.dim(l);
    RealMatrix d2 = RealMatrix::Zero(n, n);
    for (std::size_t lin = 0; lin < x.size(); ++lin) {
      const auto idx = x.multi_index(lin);
      for (std::size_t j = 0; j < n; ++j) {
        auto other = idx;
        other[l] = j;
        const double diff = x[lin] - x.at(other);
        d2(idx[l], j) += diff * diff;
      }
    }
    std::vector<double> off;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off.push_back(d2(i, j));
    std::sort(off.begin(), off.end());
    const double med = off.size() % 2 ? off[off.size() / 2]
                                      : 0.5 * (off[off.size() / 2 - 1] + off[off.size() / 2]);
    EXPECT_NEAR(median_squared_distance(x, l), med, 1e-12 * med);
    const RealMatrix s = build_similarity(x, l, med);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(s(i, j), std::exp(-d2(i, j) / med), 1e-12);
  }
}

TEST(Similarity, IdenticalSlicesAndDiagonal) {
  DenseTensor x({3, 2}, {1, 2, 1, 2, 5, -1});
  const RealMatrix s = build_similarity(x, 0, 1.0);
  EXPECT_EQ(s(0, 1), 1.0);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(s(i, i), 1.0);
  EXPECT_THROW(build_similarity(x, 0, 0.0), ShapeError);
  EXPECT_THROW(build_similarity(x, 0, -1.0), ShapeError);
}

TEST(Similarity, KernelIsPsdProperty) {
  Gen g(29);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseTensor x = random_tensor(g, random_dims(g, 3, 2, 6));
    for (const auto& s : build_similarities(x)) {
      EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(s);
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    }
  }
}

TEST(PsdFloor, ClipsEigenvalues) {
  Gen g(30);
  const RealMatrix spd = random_spd(g, 4);
  EXPECT_LT((psd_floor(spd, 0.0) - spd).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(psd_floor(-RealMatrix::Identity(3, 3), 0.0).cwiseAbs().maxCoeff(), 1e-14);
  const RealMatrix a = random_matrix(g, 5, 5);
  const RealMatrix sym = a + a.transpose();
  const RealMatrix f = psd_floor(sym, 0.0);
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(f);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  EXPECT_THROW(psd_floor(RealMatrix::Ones(2, 3), 0.0), ShapeError);
}
