#pragma once

#include <cstdint>
#include <vector>

namespace patchwork::geo {

/// Latitude limit of the spherical web-mercator square.
inline constexpr double kMaxLatitude = 85.05112877980659;
/// Mean earth radius used for every distance in the project.
inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr int kMaxZoom = 22;

class GeoPoint {
 public:
  GeoPoint() = default;
  /// Throws ConfigError when lon/lat fall outside the mercator domain.
  GeoPoint(double lon, double lat);

  double lon() const { return lon_; }
  double lat() const { return lat_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lon_ = 0.0;
  double lat_ = 0.0;
};

class GeoBBox {
 public:
  GeoBBox() = default;
  GeoBBox(GeoPoint min, GeoPoint max);

  const GeoPoint& min() const { return min_; }
  const GeoPoint& max() const { return max_; }
  double width_deg() const { return max_.lon() - min_.lon(); }
  double height_deg() const { return max_.lat() - min_.lat(); }
  GeoPoint center() const;

  bool contains(const GeoPoint& p) const;
  bool contains(const GeoBBox& other) const;

  friend bool operator==(const GeoBBox&, const GeoBBox&) = default;

 private:
  GeoPoint min_;
  GeoPoint max_;
};

/// XYZ slippy-map tile address; y grows southward.
class TileCoord {
 public:
  TileCoord() = default;
  TileCoord(int z, std::int64_t x, std::int64_t y);

  int z() const { return z_; }
  std::int64_t x() const { return x_; }
  std::int64_t y() const { return y_; }

  friend bool operator==(const TileCoord&, const TileCoord&) = default;
  friend auto operator<=>(const TileCoord&, const TileCoord&) = default;

 private:
  int z_ = 0;
  std::int64_t x_ = 0;
  std::int64_t y_ = 0;
};

double deg_to_rad(double deg);
double rad_to_deg(double rad);

// Normalised mercator coordinates in [0, 1], origin at the north-west corner.
double lon_to_mercator_x(double lon);
double lat_to_mercator_y(double lat);
double mercator_x_to_lon(double x);
double mercator_y_to_lat(double y);

GeoBBox tile_to_bbox(const TileCoord& t);

/// Tiles whose interior intersects `bbox` at zoom `z`, row-major (north row first).
/// Throws ConfigError for z outside [0, kMaxZoom].
std::vector<TileCoord> bbox_to_tiles(const GeoBBox& bbox, int z);

/// Haversine great-circle distance in meters.
double geo_distance_m(const GeoPoint& a, const GeoPoint& b);

}  // namespace patchwork::geo
