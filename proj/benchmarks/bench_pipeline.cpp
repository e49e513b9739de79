#include <benchmark/benchmark.h>

#include <random>

#include "patchwork/learner.hpp"
#include "patchwork/patchify.hpp"
#include "patchwork/reference_net.hpp"
#include "patchwork/spatial.hpp"

using namespace patchwork;

namespace {

MapSheet noise_sheet(int side) {
  MapSheet s;
  s.sheet_id = "bench";
  s.image = Raster(side, side, 3);
  std::mt19937 rng(1);
  for (auto& v : s.image.data()) v = static_cast<std::uint8_t>(rng());
  s.bbox = geo::GeoBBox({-3.2, 55.9}, {-3.1, 56.0});
  return s;
}

}  // namespace

static void BM_SliceSheet(benchmark::State& state) {
  const auto sheet = noise_sheet(static_cast<int>(state.range(0)));
  const SliceSpec spec{SliceMode::Pixels, 100, true};
  for (auto _ : state) benchmark::DoNotOptimize(slice(sheet, spec));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(sheet.image.data().size()));
}
BENCHMARK(BM_SliceSheet)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

static void BM_Inference(benchmark::State& state) {
  AugmentConfig aug;
  std::unordered_map<std::string, Raster> rasters;
  std::vector<Patch> patches;
  std::mt19937 rng(2);
  for (int i = 0; i < 512; ++i) {
    Raster r(100, 100, 1);
    for (auto& v : r.data()) v = static_cast<std::uint8_t>(rng());
    Patch p;
    p.patch_id = "p" + std::to_string(i);
    rasters[p.patch_id] = std::move(r);
    patches.push_back(p);
  }
  RasterMapEncoder enc(std::move(rasters), aug, NormStats{});
  ReferenceNet net({50 * 50, {256, 64}, 4, 1});
  InferOptions opts;
  opts.workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(infer(net, enc, patches, opts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(patches.size()));
}
BENCHMARK(BM_Inference)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_QuantileBins(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(20, 90);
  std::vector<double> v(static_cast<std::size_t>(state.range(0)));
  for (auto& x : v) x = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(quantile_bins(v, 7));
}
BENCHMARK(BM_QuantileBins)->Arg(100'000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
