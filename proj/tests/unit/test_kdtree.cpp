#include <gtest/gtest.h>

#include <random>

#include "patchwork/error.hpp"
#include "patchwork/kdtree.hpp"

using namespace patchwork;

namespace {

std::vector<Point2> random_points(std::size_t n, std::uint64_t seed, bool grid = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1000);
  std::vector<Point2> pts(n);
  for (auto& p : pts) {
    p = {u(rng), u(rng)};
    if (grid) p = {std::floor(p.x / 50), std::floor(p.y / 50)};
  }
  return pts;
}

double d2(const Point2& a, const Point2& b) {
  return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
}

}  // namespace

TEST(KdTree, SinglePoint) {
  KdTree t({{3, 4}});
  auto hit = t.nearest({0, 0});
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->index, 0u);
  EXPECT_EQ(hit->dist2, 25.0);
  EXPECT_FALSE(t.nearest({0, 0}, 0));
  EXPECT_THROW(KdTree(std::vector<Point2>{}), DataError);
}

TEST(KdTree, NearestMatchesBruteForce) {
  for (bool grid : {false, true}) {
    auto pts = random_points(10000, grid ? 2 : 1, grid);
    KdTree t(pts, 8);
    auto queries = random_points(1000, 3);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto& p = grid ? pts[q] : queries[q];
      std::optional<std::size_t> ex = grid ? std::optional<std::size_t>(q) : std::nullopt;
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (ex && i == *ex) continue;
        const double d = d2(p, pts[i]);
        if (d < bd) {
          bd = d;
          best = i;
        }
      }
      auto hit = t.nearest(p, ex);
      ASSERT_TRUE(hit);
      EXPECT_EQ(hit->index, best);
      EXPECT_EQ(hit->dist2, bd);
    }
  }
}

TEST(KdTree, RadiusMatchesBruteForce) {
  auto pts = random_points(5000, 4, true);
  KdTree t(pts);
  auto queries = random_points(200, 5);
  for (const auto& q : queries) {
    for (double r : {0.0, 1.0, 2.5, 7.0}) {
      Point2 g{std::floor(q.x / 50), std::floor(q.y / 50)};
      std::vector<std::size_t> want;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (d2(g, pts[i]) <= r * r) want.push_back(i);
      EXPECT_EQ(t.radius(g, r), want);
    }
  }
}

TEST(KdTree, RadiusZeroFindsCoincidentOnly) {
  KdTree t({{1, 1}, {1, 1}, {1, 1.0001}});
  EXPECT_EQ(t.radius({1, 1}, 0.0), (std::vector<std::size_t>{0, 1}));
}
