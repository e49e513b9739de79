#include <gtest/gtest.h>

#include "patchwork/config.hpp"
#include "patchwork/error.hpp"
#include "patchwork/fsutil.hpp"
#include "test_support.hpp"

using namespace patchwork;

TEST(Config, DefaultsValidateAndRoundTrip) {
  testutil::TempDir dir;
  ProjectConfig c;
  c.base_dir = dir.path();
  c.validate();
  auto j = c.to_json();
  auto back = ProjectConfig::from_json(j, dir.path());
  EXPECT_EQ(back.to_json(), j);
  EXPECT_EQ(back.paths.catalog, dir.path() / "catalog.csv");
  EXPECT_EQ(back.thresholds.isolation_m, 250.0);
  EXPECT_EQ(back.thresholds.link_m, 150.0);
  EXPECT_EQ(back.thresholds.density_radius_m, 500.0);
  EXPECT_EQ(back.schema.size(), 4u);
}

TEST(Config, SeedPropagates) {
  ProjectConfig c;
  c.apply_seed(42);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.split.seed, 42u);
  EXPECT_EQ(c.train.seed, 42u);
}

TEST(Config, LoadErrors) {
  testutil::TempDir dir;
  EXPECT_THROW(ProjectConfig::load(dir / "absent.json"), ConfigError);
  atomic_write_text(dir / "bad.json", "{ not json");
  EXPECT_THROW(ProjectConfig::load(dir / "bad.json"), ConfigError);
  atomic_write_text(dir / "mode.json", R"({"slice": {"mode": "furlongs", "size": 1}})");
  EXPECT_THROW(ProjectConfig::load(dir / "mode.json"), ConfigError);
  atomic_write_text(dir / "label.json", R"({"labels": {"filter": 9}})");
  EXPECT_THROW(ProjectConfig::load(dir / "label.json"), ConfigError);
}

TEST(Config, PartialFileKeepsDefaults) {
  testutil::TempDir dir;
  atomic_write_text(dir / "p.json",
                    R"({"seed": 3, "thresholds": {"isolation_m": 300}, "ensemble": {"context_k": 5}})");
  auto c = ProjectConfig::load(dir / "p.json");
  EXPECT_EQ(c.thresholds.isolation_m, 300.0);
  EXPECT_EQ(c.thresholds.link_m, 150.0);
  ASSERT_TRUE(c.ensemble);
  EXPECT_EQ(c.ensemble->context_k, 5);
  EXPECT_EQ(c.train.seed, 3u);
  EXPECT_EQ(parse_slice_mode("meters"), SliceMode::Meters);
  EXPECT_EQ(to_string(SliceMode::Pixels), "pixels");
}
