#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "patchwork/error.hpp"
#include "patchwork/geo.hpp"
#include "test_support.hpp"

using namespace patchwork;
using namespace patchwork::geo;

namespace {

// Slippy-map formulas evaluated directly.
double oracle_lon(double x, int z) { return x / std::ldexp(1.0, z) * 360.0 - 180.0; }
double oracle_lat(double y, int z) {
  return std::atan(std::sinh(M_PI * (1.0 - 2.0 * y / std::ldexp(1.0, z)))) * 180.0 / M_PI;
}

}  // namespace

TEST(Geo, WorldTile) {
  auto b = tile_to_bbox({0, 0, 0});
  EXPECT_DOUBLE_EQ(b.min().lon(), -180.0);
  EXPECT_DOUBLE_EQ(b.max().lon(), 180.0);
  EXPECT_NEAR(b.min().lat(), -85.0511, 1e-4);
  EXPECT_NEAR(b.max().lat(), 85.0511, 1e-4);
}

TEST(Geo, ZoomOneTiles) {
  auto ne = tile_to_bbox({1, 1, 0});
  EXPECT_NEAR(ne.min().lon(), 0.0, 1e-12);
  EXPECT_NEAR(ne.min().lat(), 0.0, 1e-12);
  EXPECT_NEAR(ne.max().lon(), 180.0, 1e-12);
  EXPECT_NEAR(ne.max().lat(), oracle_lat(0, 1), 1e-12);

  auto sw = tile_to_bbox({1, 0, 1});
  EXPECT_NEAR(sw.min().lon(), -180.0, 1e-12);
  EXPECT_NEAR(sw.min().lat(), -85.0511, 1e-4);
  EXPECT_NEAR(sw.max().lon(), 0.0, 1e-12);
  EXPECT_NEAR(sw.max().lat(), 0.0, 1e-12);
}

TEST(Geo, TileBoxesMatchSlippyFormulas) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const int z = static_cast<int>(rng() % 19);
    const auto n = std::int64_t{1} << z;
    const auto x = static_cast<std::int64_t>(rng() % n);
    const auto y = static_cast<std::int64_t>(rng() % n);
    auto b = tile_to_bbox({z, x, y});
    EXPECT_NEAR(b.min().lon(), oracle_lon(x, z), 1e-9);
    EXPECT_NEAR(b.max().lon(), oracle_lon(x + 1, z), 1e-9);
    EXPECT_NEAR(b.max().lat(), oracle_lat(y, z), 1e-9);
    EXPECT_NEAR(b.min().lat(), oracle_lat(y + 1, z), 1e-9);
  }
}

TEST(Geo, WorldBoxAtZoomOneHasFourTiles) {
  GeoBBox world({-180, -85.0511}, {180, 85.0511});
  auto tiles = bbox_to_tiles(world, 1);
  ASSERT_EQ(tiles.size(), 4u);
  EXPECT_EQ(tiles[0], TileCoord(1, 0, 0));
  EXPECT_EQ(tiles[1], TileCoord(1, 1, 0));
  EXPECT_EQ(tiles[2], TileCoord(1, 0, 1));
  EXPECT_EQ(tiles[3], TileCoord(1, 1, 1));
}

TEST(Geo, BoxInsideOneTile) {
  auto t = tile_to_bbox({14, 8000, 5000});
  const double dx = t.width_deg() / 4, dy = t.height_deg() / 4;
  GeoBBox inner({t.min().lon() + dx, t.min().lat() + dy}, {t.max().lon() - dx, t.max().lat() - dy});
  auto tiles = bbox_to_tiles(inner, 14);
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0], TileCoord(14, 8000, 5000));
}

TEST(Geo, TwoByThreeBlockRowMajor) {
  // Corners strictly inside tiles (8190,5447) and (8192,5448).
  auto a = tile_to_bbox({14, 8190, 5447});
  auto b = tile_to_bbox({14, 8192, 5448});
  GeoBBox box({a.center().lon(), b.center().lat()}, {b.center().lon(), a.center().lat()});
  auto tiles = bbox_to_tiles(box, 14);
  ASSERT_EQ(tiles.size(), 6u);
  std::vector<TileCoord> want;
  for (std::int64_t y = 5447; y <= 5448; ++y)
    for (std::int64_t x = 8190; x <= 8192; ++x) want.emplace_back(14, x, y);
  EXPECT_EQ(tiles, want);
}

TEST(Geo, ZoomAboveLimitRejected) {
  GeoBBox b({0, 0}, {1, 1});
  EXPECT_THROW(bbox_to_tiles(b, 23), ConfigError);
  EXPECT_THROW(bbox_to_tiles(b, -1), ConfigError);
}

TEST(Geo, InvalidCoordinatesRejected) {
  EXPECT_THROW(GeoPoint(181, 0), ConfigError);
  EXPECT_THROW(GeoPoint(0, 86), ConfigError);
  EXPECT_THROW(GeoBBox({1, 0}, {0, 1}), ConfigError);
  EXPECT_THROW(TileCoord(1, 2, 0), ConfigError);
  EXPECT_THROW(TileCoord(1, 0, -1), ConfigError);
}

TEST(Geo, RoundTripContainsTile) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const int z = static_cast<int>(rng() % 23);
    const auto n = std::int64_t{1} << z;
    TileCoord t(z, static_cast<std::int64_t>(rng() % n), static_cast<std::int64_t>(rng() % n));
    auto tiles = bbox_to_tiles(tile_to_bbox(t), z);
    EXPECT_NE(std::find(tiles.begin(), tiles.end(), t), tiles.end()) << z << " " << t.x() << " " << t.y();
  }
}

TEST(Geo, TileCountMatchesCornerTiles) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lon(-179, 179), lat(-80, 80), ext(0.001, 0.5);
  for (int i = 0; i < 300; ++i) {
    const int z = 4 + static_cast<int>(rng() % 10);
    const double x0 = lon(rng), y0 = lat(rng);
    GeoBBox b({x0, y0}, {std::min(x0 + ext(rng), 180.0), std::min(y0 + ext(rng), 85.0)});
    const double n = std::ldexp(1.0, z);
    auto tx = [&](double l) { return std::floor((l + 180.0) / 360.0 * n); };
    auto ty = [&](double la) {
      const double r = la * M_PI / 180.0;
      return std::floor((1.0 - std::log(std::tan(r) + 1.0 / std::cos(r)) / M_PI) / 2.0 * n);
    };
    const double nx = tx(b.max().lon()) - tx(b.min().lon()) + 1;
    const double ny = ty(b.min().lat()) - ty(b.max().lat()) + 1;
    EXPECT_EQ(bbox_to_tiles(b, z).size(), static_cast<std::size_t>(nx * ny));
  }
}

TEST(Geo, MercatorRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lon(-180, 180), lat(-85, 85);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const double a = lon(rng), b = lat(rng);
    worst = std::max(worst, std::abs(mercator_x_to_lon(lon_to_mercator_x(a)) - a));
    worst = std::max(worst, std::abs(mercator_y_to_lat(lat_to_mercator_y(b)) - b));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Geo, DistanceExamples) {
  GeoPoint o(0, 0);
  EXPECT_EQ(geo_distance_m(o, o), 0.0);
  EXPECT_NEAR(geo_distance_m(o, {1, 0}), 111195.08, 0.01);
  EXPECT_NEAR(geo_distance_m(o, {0, 1}), geo_distance_m(o, {1, 0}), 1e-6);
}

TEST(Geo, DistanceMatchesOracleAndTriangleInequality) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> lon(-180, 180), lat(-85, 85);
  for (int i = 0; i < 2000; ++i) {
    GeoPoint a(lon(rng), lat(rng)), b(lon(rng), lat(rng)), c(lon(rng), lat(rng));
    const double ab = geo_distance_m(a, b);
    EXPECT_NEAR(ab, testutil::haversine_oracle(a.lon(), a.lat(), b.lon(), b.lat()), 1e-6);
    EXPECT_DOUBLE_EQ(ab, geo_distance_m(b, a));
    EXPECT_LE(geo_distance_m(a, c), ab + geo_distance_m(b, c) + 1e-6);
  }
}
