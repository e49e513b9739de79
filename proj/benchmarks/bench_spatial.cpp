#include <benchmark/benchmark.h>

#include <random>

#include "patchwork/kdtree.hpp"
#include "patchwork/postprocess.hpp"

using namespace patchwork;

namespace {

std::vector<Point2> planar(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1e6);
  std::vector<Point2> v(n);
  for (auto& p : v) p = {u(rng), u(rng)};
  return v;
}

std::vector<PredictionRecord> predictions(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lon(-6.0, -2.0), lat(55.0, 58.0);
  std::vector<PredictionRecord> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = {"p" + std::to_string(i), static_cast<int>(rng() % 4), 0.9, {lon(rng), lat(rng)}};
  }
  return v;
}

}  // namespace

// One million points, ten thousand nearest-neighbour queries per iteration.
static void BM_KdTreeNearest1M(benchmark::State& state) {
  KdTree tree(planar(1'000'000, 1));
  const auto queries = planar(10'000, 2);
  for (auto _ : state) {
    for (const auto& q : queries) benchmark::DoNotOptimize(tree.nearest(q));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.size()));
}
BENCHMARK(BM_KdTreeNearest1M)->Unit(benchmark::kMillisecond);

static void BM_KdTreeBuild(benchmark::State& state) {
  const auto pts = planar(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(KdTree(pts));
}
BENCHMARK(BM_KdTreeBuild)->Arg(100'000)->Arg(1'000'000)->Unit(benchmark::kMillisecond);

static void BM_SpatialIndexNearest(benchmark::State& state) {
  const auto preds = predictions(1'000'000, 4);
  std::vector<geo::GeoPoint> pts;
  for (const auto& p : preds) pts.push_back(p.center);
  SpatialIndex idx(pts);
  const auto queries = predictions(10'000, 5);
  for (auto _ : state) {
    for (const auto& q : queries) benchmark::DoNotOptimize(idx.nearest(q.center));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.size()));
}
BENCHMARK(BM_SpatialIndexNearest)->Unit(benchmark::kMillisecond);

static void BM_RemoveIsolated(benchmark::State& state) {
  const auto preds = predictions(static_cast<std::size_t>(state.range(0)), 6);
  for (auto _ : state) benchmark::DoNotOptimize(remove_isolated(preds, 1, 250.0));
}
BENCHMARK(BM_RemoveIsolated)->Arg(10'000)->Arg(200'000)->Unit(benchmark::kMillisecond);
