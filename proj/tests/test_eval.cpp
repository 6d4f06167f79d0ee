#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "tenrec/eval.hpp"
#include "test_util.hpp"

using namespace tenrec;
using namespace tenrec::testing;

TEST(Eval, FitAndRseMatchLoops) {
  Gen g(61);
  for (int trial = 0; trial < 10; ++trial) {
    const Dims dims = random_dims(g, 3, 2, 5);
    const DenseTensor x = random_tensor(g, dims), y = random_tensor(g, dims);
    const ObservationMask m = mask_random(dims, 0.4, static_cast<std::uint64_t>(trial));
    double num = 0.0, den = 0.0;
    for (auto lin : m.linear()) {
      num += (x[lin] - y[lin]) * (x[lin] - y[lin]);
      den += x[lin] * x[lin];
    }
    EXPECT_NEAR(fit(x, y, m), 1.0 - std::sqrt(num / den), 1e-12);
    EXPECT_NEAR(rse(x, y, m), std::sqrt(num / static_cast<double>(m.count())), 1e-12);
    EXPECT_NEAR(fit(x, y), fit(x, y, ObservationMask::full(dims)), 1e-12);
  }
}

TEST(Eval, IdenticalTensorsFitOne) {
  Gen g(62);
  const DenseTensor x = random_tensor(g, {3, 4});
  EXPECT_EQ(fit(x, x), 1.0);
  EXPECT_EQ(rse(x, x), 0.0);
  EXPECT_THROW(fit(x, random_tensor(g, {4, 3})), ShapeError);
}

TEST(Eval, MaskRandomCountAndDeterminism) {
  const Dims dims{7, 5, 3};
  const ObservationMask m = mask_random(dims, 0.15, 4);
  EXPECT_EQ(m.count(), static_cast<std::size_t>(std::ceil(0.15 * 105)));
  EXPECT_EQ(mask_random(dims, 0.15, 4), m);
  std::set<std::size_t> unique(m.linear().begin(), m.linear().end());
  EXPECT_EQ(unique.size(), m.count());
  EXPECT_EQ(mask_random(dims, 1.0, 1).count(), 105u);
  EXPECT_THROW(mask_random(dims, 1.5, 1), ShapeError);
}

TEST(Eval, SupportCellsPartition) {
  const ObservationMask m = mask_random({4, 4}, 0.5, 2);
  EXPECT_EQ(support_cells(EvalSupport::observed, m), m);
  EXPECT_EQ(support_cells(EvalSupport::missing, m).count() + m.count(), 16u);
  EXPECT_EQ(support_cells(EvalSupport::all, m).count(), 16u);
  EXPECT_EQ(parse_eval_support("missing"), EvalSupport::missing);
  EXPECT_THROW(parse_eval_support("some"), ShapeError);
}

TEST(Eval, RandomLowrankHasUnitRms) {
  const DenseTensor x = random_lowrank({6, 5, 4}, {2, 2, 2}, 3);
  EXPECT_NEAR(std::sqrt(squared_norm(x) / static_cast<double>(x.size())), 1.0, 1e-12);
  const TuckerModel h = hosvd(x, {2, 2, 2});
  EXPECT_LT(max_abs_diff(tucker_reconstruct(h), x), 1e-10);
}

TEST(Eval, PinObservedKeepsObservedEntries) {
  Gen g(63);
  const DenseTensor model = random_tensor(g, {3, 3}), x = random_tensor(g, {3, 3});
  const ObservationMask m = mask_random({3, 3}, 0.5, 9);
  const DenseTensor pinned = pin_observed(model, x, m.bitmap());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(pinned[i], m.contains(i) ? x[i] : model[i]);
}
