#include <gtest/gtest.h>

#include <random>

#include "patchwork/error.hpp"
#include "patchwork/metrics.hpp"

using namespace patchwork;

TEST(Metrics, FourPredictionExample) {
  auto m = compute_metrics({0, 1, 1, 1}, {0, 0, 1, 1}, 2);
  EXPECT_NEAR(m.per_class[0].f1, 200.0 / 3.0, 1e-9);
  EXPECT_NEAR(m.per_class[1].f1, 80.0, 1e-9);
  EXPECT_NEAR(m.f1_macro, 220.0 / 3.0, 1e-9);
  EXPECT_NEAR(m.f1_micro, 75.0, 1e-9);
  EXPECT_NEAR(m.accuracy, 75.0, 1e-9);
  EXPECT_EQ(m.per_class[1].support, 3u);
}

TEST(Metrics, PerfectPredictions) {
  auto m = compute_metrics({0, 1, 2, 3, 3}, {0, 1, 2, 3, 3}, 4);
  EXPECT_EQ(m.f1_macro, 100.0);
  EXPECT_EQ(m.f1_micro, 100.0);
  EXPECT_EQ(m.precision_macro, 100.0);
  EXPECT_EQ(m.recall_macro, 100.0);
  EXPECT_EQ(m.accuracy, 100.0);
}

TEST(Metrics, AbsentLabelsExcludedFromMacro) {
  auto m = compute_metrics({0, 0, 1}, {0, 0, 1}, 4);
  EXPECT_EQ(m.f1_macro, 100.0);
}

TEST(Metrics, MicroF1EqualsAccuracy) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 6;
    ConfusionMatrix cm(n);
    for (std::size_t g = 0; g < n; ++g)
      for (std::size_t p = 0; p < n; ++p) cm.add(static_cast<int>(g), static_cast<int>(p), rng() % 50);
    if (cm.total() == 0) continue;
    auto m = compute_metrics(cm);
    EXPECT_NEAR(m.f1_micro, m.accuracy, 1e-9);
  }
}

TEST(Metrics, HandComputedPerClass) {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 5);
  cm.add(0, 1, 2);
  cm.add(1, 1, 3);
  cm.add(2, 0, 1);
  cm.add(2, 2, 4);
  auto m = compute_metrics(cm);
  // Class 0: tp 5, fp 1, fn 2.
  EXPECT_NEAR(m.per_class[0].precision, 500.0 / 6.0, 1e-9);
  EXPECT_NEAR(m.per_class[0].recall, 500.0 / 7.0, 1e-9);
  EXPECT_NEAR(m.per_class[0].f1, 100.0 * 10.0 / 13.0, 1e-9);
  EXPECT_NEAR(m.accuracy, 1200.0 / 15.0, 1e-9);
}

TEST(Metrics, MergeAndBounds) {
  ConfusionMatrix a(2), b(2);
  a.add(0, 1);
  b.add(0, 1, 2);
  a.merge(b);
  EXPECT_EQ(a.count(0, 1), 3u);
  EXPECT_EQ(a.total(), 3u);
  EXPECT_THROW(a.add(2, 0), DataError);
  auto j = compute_metrics(a).to_json();
  EXPECT_TRUE(j.contains("f1_macro"));
  EXPECT_TRUE(j.contains("confusion"));
}
