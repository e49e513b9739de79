#include "patchwork/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "patchwork/error.hpp"

namespace patchwork::geo {

namespace {

constexpr double kPi = std::numbers::pi;
// Slack for values produced by the inverse projection at the poles of the square.
constexpr double kLatSlack = 1e-9;
// Fractional tile positions this close to an integer are snapped to it.
constexpr double kTileSnap = 1e-9;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kTileSnap ? r : v;
}

}  // namespace

GeoPoint::GeoPoint(double lon, double lat) : lon_(lon), lat_(lat) {
  if (!std::isfinite(lon) || !std::isfinite(lat) || lon < -180.0 || lon > 180.0 ||
      lat < -kMaxLatitude - kLatSlack || lat > kMaxLatitude + kLatSlack) {
    std::ostringstream os;
    os << "point (" << lon << ", " << lat << ") outside lon [-180,180] / lat [-"
       << kMaxLatitude << "," << kMaxLatitude << "]";
    throw ConfigError(os.str());
  }
}

GeoBBox::GeoBBox(GeoPoint min, GeoPoint max) : min_(min), max_(max) {
  if (min.lon() > max.lon() || min.lat() > max.lat()) {
    throw ConfigError("bbox min corner must not exceed max corner");
  }
}

GeoPoint GeoBBox::center() const {
  return {(min_.lon() + max_.lon()) / 2.0, (min_.lat() + max_.lat()) / 2.0};
}

bool GeoBBox::contains(const GeoPoint& p) const {
  return p.lon() >= min_.lon() && p.lon() <= max_.lon() && p.lat() >= min_.lat() &&
         p.lat() <= max_.lat();
}

bool GeoBBox::contains(const GeoBBox& other) const {
  return contains(other.min()) && contains(other.max());
}

TileCoord::TileCoord(int z, std::int64_t x, std::int64_t y) : z_(z), x_(x), y_(y) {
  if (z < 0 || z > kMaxZoom) {
    throw ConfigError("zoom " + std::to_string(z) + " outside [0, " +
                      std::to_string(kMaxZoom) + "]");
  }
  const std::int64_t n = std::int64_t{1} << z;
  if (x < 0 || x >= n || y < 0 || y >= n) {
    std::ostringstream os;
    os << "tile (" << z << "/" << x << "/" << y << ") outside the zoom " << z << " grid";
    throw ConfigError(os.str());
  }
}

double deg_to_rad(double deg) { return deg * kPi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

double lon_to_mercator_x(double lon) { return (lon + 180.0) / 360.0; }

double lat_to_mercator_y(double lat) {
  const double phi = deg_to_rad(lat);
  return (1.0 - std::asinh(std::tan(phi)) / kPi) / 2.0;
}

double mercator_x_to_lon(double x) { return x * 360.0 - 180.0; }

double mercator_y_to_lat(double y) {
  return rad_to_deg(std::atan(std::sinh(kPi * (1.0 - 2.0 * y))));
}

GeoBBox tile_to_bbox(const TileCoord& t) {
  const double n = std::ldexp(1.0, t.z());
  const double west = mercator_x_to_lon(static_cast<double>(t.x()) / n);
  const double east = mercator_x_to_lon(static_cast<double>(t.x() + 1) / n);
  const double north = mercator_y_to_lat(static_cast<double>(t.y()) / n);
  const double south = mercator_y_to_lat(static_cast<double>(t.y() + 1) / n);
  return {GeoPoint{west, south}, GeoPoint{east, north}};
}

std::vector<TileCoord> bbox_to_tiles(const GeoBBox& bbox, int z) {
  if (z < 0 || z > kMaxZoom) {
    throw ConfigError("zoom " + std::to_string(z) + " outside [0, " +
                      std::to_string(kMaxZoom) + "]");
  }
  const double n = std::ldexp(1.0, z);
  const auto last = static_cast<std::int64_t>(n) - 1;
  auto clamp = [last](double v) {
    return std::clamp(static_cast<std::int64_t>(v), std::int64_t{0}, last);
  };

  const double fx0 = snap(lon_to_mercator_x(bbox.min().lon()) * n);
  const double fx1 = snap(lon_to_mercator_x(bbox.max().lon()) * n);
  // North edge has the smaller y.
  const double fy0 = snap(lat_to_mercator_y(bbox.max().lat()) * n);
  const double fy1 = snap(lat_to_mercator_y(bbox.min().lat()) * n);

  const std::int64_t x0 = clamp(std::floor(fx0));
  const std::int64_t y0 = clamp(std::floor(fy0));
  // A max edge lying exactly on a tile boundary only touches the next tile.
  const std::int64_t x1 = std::max(x0, clamp(std::ceil(fx1) - 1.0));
  const std::int64_t y1 = std::max(y0, clamp(std::ceil(fy1) - 1.0));

  std::vector<TileCoord> tiles;
  tiles.reserve(static_cast<std::size_t>((x1 - x0 + 1) * (y1 - y0 + 1)));
  for (std::int64_t y = y0; y <= y1; ++y) {
    for (std::int64_t x = x0; x <= x1; ++x) {
      tiles.emplace_back(z, x, y);
    }
  }
  return tiles;
}

double geo_distance_m(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = deg_to_rad(a.lat());
  const double phi2 = deg_to_rad(b.lat());
  const double dphi = phi2 - phi1;
  const double dlambda = deg_to_rad(b.lon() - a.lon());
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = std::min(1.0, s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

}  // namespace patchwork::geo
