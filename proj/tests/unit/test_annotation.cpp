#include <gtest/gtest.h>

#include <fstream>

#include "patchwork/annotation.hpp"
#include "patchwork/error.hpp"
#include "test_support.hpp"

using namespace patchwork;

namespace {

std::vector<Patch> grid_patches(int n, std::vector<double> means = {}) {
  std::vector<Patch> out;
  for (int i = 0; i < n; ++i) {
    Patch p;
    p.sheet_id = "s";
    p.row = 0;
    p.col = i;
    p.patch_id = make_patch_id("s", 0, i);
    p.rect = {i * 10, 0, 10, 10};
    p.mean = means.empty() ? 0.0 : means[i];
    p.std = 1.0 - p.mean;
    out.push_back(p);
  }
  return out;
}

std::unordered_set<std::string> ids_of(const std::vector<Patch>& ps) {
  std::unordered_set<std::string> s;
  for (const auto& p : ps) s.insert(p.patch_id);
  return s;
}

struct Fixture {
  testutil::TempDir dir;
  std::vector<Patch> patches = grid_patches(6);
  std::int64_t now = 1000;
  std::unique_ptr<AnnotationStore> open() {
    return std::make_unique<AnnotationStore>(dir / "log.jsonl", LabelSchema::railspace_default(),
                                             ids_of(patches), [this] { return now++; });
  }
};

}  // namespace

TEST(Schema, DefaultHasFourLabels) {
  auto s = LabelSchema::railspace_default();
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s.name(0), "no");
  EXPECT_EQ(LabelSchema::from_json(s.to_json()).labels().size(), 4u);
  EXPECT_THROW(LabelSchema({"a", "a"}), ConfigError);
}

TEST(Annotation, RecordAndReject) {
  Fixture f;
  auto store = f.open();
  auto rec = store->record({"s-r0000-c0000", 2, "ann", {}, {}});
  EXPECT_EQ(rec.source, AnnotationSource::Fresh);
  EXPECT_FALSE(rec.prior_prediction);
  EXPECT_EQ(store->event_count(), 1u);
  EXPECT_THROW(store->record({"s-r0000-c0000", 7, "ann", {}, {}}), RejectedLabel);
  EXPECT_THROW(store->record({"unknown", 1, "ann", {}, {}}), RejectedLabel);
  EXPECT_THROW(store->record({"s-r0000-c0001", 1, "", {}, {}}), RejectedLabel);
  EXPECT_EQ(store->event_count(), 1u);
}

TEST(Annotation, ReviewSources) {
  Fixture f;
  auto store = f.open();
  auto c = store->record({"s-r0000-c0000", 1, "ann", 1, {}});
  EXPECT_EQ(c.source, AnnotationSource::ReviewConfirmed);
  EXPECT_EQ(c.prior_prediction, 1);
  auto k = store->record({"s-r0000-c0001", 2, "ann", 1, {}});
  EXPECT_EQ(k.source, AnnotationSource::ReviewCorrected);
  for (const auto& r : *store->snapshot()) {
    EXPECT_EQ(r.source != AnnotationSource::Fresh, r.prior_prediction.has_value());
  }
}

TEST(Annotation, GoldStandardLatestWinsAndConflicts) {
  Fixture f;
  auto store = f.open();
  store->record({"s-r0000-c0000", 1, "a", {}, {}});
  store->record({"s-r0000-c0001", 2, "a", {}, {}});
  store->record({"s-r0000-c0002", 3, "a", {}, {}});
  auto gold = store->gold_standard();
  EXPECT_EQ(gold.size(), 3u);
  store->record({"s-r0000-c0000", 0, "a", {}, {}});
  gold = store->gold_standard();
  ASSERT_EQ(gold.size(), 3u);
  EXPECT_EQ(gold[0].label_id, 0);
  store->record({"s-r0000-c0001", 3, "b", {}, {}});
  gold = store->gold_standard();
  ASSERT_EQ(gold.size(), 4u);
  EXPECT_TRUE(gold[1].conflict);
  EXPECT_TRUE(gold[2].conflict);
  EXPECT_EQ(gold[1].annotator, "a");
  EXPECT_EQ(gold[2].annotator, "b");
  store->export_gold_standard(f.dir / "gold.csv");
  auto back = read_gold_standard(f.dir / "gold.csv");
  ASSERT_EQ(back.size(), 4u);
  EXPECT_TRUE(back[1].conflict);
  EXPECT_EQ(store->label_counts().at(3), 1u);
}

TEST(Annotation, EmptyExportFails) {
  Fixture f;
  auto store = f.open();
  try {
    store->export_gold_standard(f.dir / "gold.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "nothing to export");
  }
}

TEST(Annotation, ReloadsLogAndIgnoresPartialTail) {
  Fixture f;
  {
    auto store = f.open();
    store->record({"s-r0000-c0000", 1, "a", {}, {}});
    store->record({"s-r0000-c0001", 2, "a", {}, {}});
  }
  {
    std::ofstream out(f.dir / "log.jsonl", std::ios::app);
    out << "{\"seq\":2,\"patch_id\":\"s-r00";
  }
  auto store = f.open();
  EXPECT_EQ(store->event_count(), 2u);
  auto rec = store->record({"s-r0000-c0002", 3, "a", {}, {}});
  EXPECT_EQ(rec.seq, 2u);
  auto again = f.open();
  EXPECT_EQ(again->event_count(), 3u);
}

TEST(Sampler, ByMeanDescending) {
  PatchSampler s(grid_patches(3, {0.1, 0.9, 0.5}));
  auto batch = s.next_batch({StrategyKind::ByMean, true, 0}, 3, {});
  ASSERT_EQ(batch.size(), 3u);
  EXPECT_DOUBLE_EQ(batch[0].patch->mean, 0.9);
  EXPECT_DOUBLE_EQ(batch[1].patch->mean, 0.5);
  EXPECT_DOUBLE_EQ(batch[2].patch->mean, 0.1);
}

TEST(Sampler, RandomIsDeterministicAndExcludes) {
  PatchSampler s(grid_patches(50));
  auto a = s.next_batch({StrategyKind::Random, false, 5}, 10, {});
  auto b = s.next_batch({StrategyKind::Random, false, 5}, 10, {});
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].patch, b[i].patch);
  std::unordered_set<std::string> ex{a[0].patch->patch_id, a[3].patch->patch_id};
  for (const auto& item : s.next_batch({StrategyKind::Random, false, 5}, 50, ex)) {
    EXPECT_FALSE(ex.contains(item.patch->patch_id));
  }
  EXPECT_TRUE(s.next_batch({StrategyKind::Random, false, 5}, 5, ids_of(s.patches())).empty());
}

TEST(Sampler, ReviewQueueByConfidence) {
  auto ps = grid_patches(4);
  std::vector<PredictionRecord> preds;
  const double conf[] = {0.9, 0.3, 0.6, 0.4};
  for (int i = 0; i < 4; ++i) preds.push_back({ps[i].patch_id, 1, conf[i], {}});
  PatchSampler s(ps, preds);
  auto batch = s.next_batch({StrategyKind::ReviewQueue, false, 0}, 4, {});
  ASSERT_EQ(batch.size(), 4u);
  EXPECT_EQ(batch[0].patch->col, 1);
  EXPECT_EQ(batch[1].patch->col, 3);
  EXPECT_EQ(batch[3].patch->col, 0);
  EXPECT_TRUE(batch[0].prediction);
  PatchSampler plain(ps);
  EXPECT_THROW(plain.next_batch({StrategyKind::ReviewQueue, false, 0}, 1, {}), ConfigError);
}

TEST(Context, SizesAndPadding) {
  Raster sheet(30, 30, 1, 0);
  for (int r = 0; r < 30; ++r)
    for (int c = 0; c < 30; ++c) sheet.at(r, c) = static_cast<std::uint8_t>(r * 30 + c);
  Patch interior;
  interior.row = 1;
  interior.col = 1;
  interior.rect = {10, 10, 10, 10};
  EXPECT_EQ(context_image(sheet, interior, 10, 1), sheet.crop(interior.rect));
  auto ctx = context_image(sheet, interior, 10, 3);
  EXPECT_EQ(ctx.rows(), 30);
  EXPECT_EQ(ctx, sheet);

  Patch corner;
  corner.rect = {0, 0, 10, 10};
  auto c = context_image(sheet, corner, 10, 3);
  EXPECT_EQ(c.rows(), 30);
  EXPECT_EQ(c.cols(), 30);
  // Cells above or left of the sheet: 5 of 9.
  int padded = 0;
  for (int gy = 0; gy < 3; ++gy) {
    for (int gx = 0; gx < 3; ++gx) {
      bool all_pad = true;
      for (int r = 0; r < 10; ++r)
        for (int cc = 0; cc < 10; ++cc)
          all_pad &= c.at(gy * 10 + r, gx * 10 + cc) == kContextPadValue;
      padded += all_pad;
    }
  }
  EXPECT_EQ(padded, 5);
  EXPECT_EQ(c.at(10, 10), sheet.at(0, 0));
  EXPECT_THROW(context_image(sheet, corner, 10, 2), ConfigError);
}
