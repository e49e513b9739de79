#include "patchwork/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include "patchwork/error.hpp"

namespace patchwork {

using nlohmann::json;

namespace {

// Above this the small-angle stretch bound is not trusted; fall back to a scan.
constexpr double kTreeRadiusLimitM = 100'000.0;

std::vector<Point2> project_all(const std::vector<geo::GeoPoint>& pts, double cos_ref) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    out.push_back({geo::kEarthRadiusM * geo::deg_to_rad(p.lon()) * cos_ref,
                   geo::kEarthRadiusM * geo::deg_to_rad(p.lat())});
  }
  return out;
}

double mid_latitude_cos(const std::vector<geo::GeoPoint>& pts) {
  if (pts.empty()) throw DataError("cannot build a spatial index over zero points");
  auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.lat() < b.lat();
  });
  return std::cos(geo::deg_to_rad(0.5 * (lo->lat() + hi->lat())));
}

}  // namespace

SpatialIndex::SpatialIndex(std::vector<geo::GeoPoint> points, std::size_t leaf_size)
    : points_(std::move(points)),
      cos_ref_(mid_latitude_cos(points_)),
      tree_(project_all(points_, cos_ref_), leaf_size) {
  min_lat_ = max_lat_ = points_.front().lat();
  for (const auto& p : points_) {
    min_lat_ = std::min(min_lat_, p.lat());
    max_lat_ = std::max(max_lat_, p.lat());
  }
}

Point2 SpatialIndex::project(const geo::GeoPoint& p) const {
  return {geo::kEarthRadiusM * geo::deg_to_rad(p.lon()) * cos_ref_,
          geo::kEarthRadiusM * geo::deg_to_rad(p.lat())};
}

double SpatialIndex::planar_stretch(const geo::GeoPoint& q) const {
  const double worst_lat = std::max({std::abs(min_lat_), std::abs(max_lat_), std::abs(q.lat())});
  const double cos_min = std::cos(geo::deg_to_rad(worst_lat));
  return std::max(1.0, cos_ref_ / cos_min) * 1.01;
}

std::vector<std::size_t> SpatialIndex::scan_within(const geo::GeoPoint& q, double radius_m) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (geo::geo_distance_m(q, points_[i]) <= radius_m) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> SpatialIndex::within(const geo::GeoPoint& q, double radius_m) const {
  if (radius_m < 0.0) return {};
  if (radius_m > kTreeRadiusLimitM) return scan_within(q, radius_m);
  auto candidates = tree_.radius(project(q), radius_m * planar_stretch(q));
  std::erase_if(candidates,
                [&](std::size_t i) { return geo::geo_distance_m(q, points_[i]) > radius_m; });
  return candidates;
}

std::optional<SpatialIndex::Neighbor> SpatialIndex::nearest(const geo::GeoPoint& q,
                                                            std::optional<std::size_t> exclude) const {
  const auto planar = tree_.nearest(project(q), exclude);
  if (!planar) return std::nullopt;
  // The planar winner bounds the true nearest distance; rescan that disc.
  const double bound = geo::geo_distance_m(q, points_[planar->index]);
  const auto candidates = bound > kTreeRadiusLimitM
                              ? scan_within(q, bound)
                              : tree_.radius(project(q), bound * planar_stretch(q));
  Neighbor best{planar->index, bound};
  for (auto i : candidates) {
    if (exclude && *exclude == i) continue;
    const double d = geo::geo_distance_m(q, points_[i]);
    if (d < best.distance_m || (d == best.distance_m && i < best.index)) best = {i, d};
  }
  return best;
}

double nearest_same_label(const std::vector<PredictionRecord>& predictions, int label,
                          std::size_t index) {
  std::vector<geo::GeoPoint> pts;
  std::optional<std::size_t> self;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].label_id != label) continue;
    if (i == index) self = pts.size();
    pts.push_back(predictions[i].center);
  }
  if (pts.empty() || (self && pts.size() == 1)) return kNoNeighbor;
  const SpatialIndex idx(std::move(pts));
  const auto nn = idx.nearest(predictions.at(index).center, self);
  return nn ? nn->distance_m : kNoNeighbor;
}

json FilterReport::to_json() const {
  return {{"label", label},         {"threshold_m", threshold_m}, {"cascade", cascade},
          {"passes", passes},       {"removed", removed},         {"kept", kept},
          {"removed_ids", removed_ids}};
}

FilterResult remove_isolated(const std::vector<PredictionRecord>& predictions, int label,
                             double threshold_m, bool cascade) {
  if (!(threshold_m >= 0.0)) throw ConfigError("isolation threshold must be >= 0");
  FilterResult result;
  result.report.label = label;
  result.report.threshold_m = threshold_m;
  result.report.cascade = cascade;

  std::vector<bool> removed(predictions.size(), false);
  for (;;) {
    std::vector<std::size_t> members;
    std::vector<geo::GeoPoint> pts;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      if (predictions[i].label_id == label && !removed[i]) {
        members.push_back(i);
        pts.push_back(predictions[i].center);
      }
    }
    ++result.report.passes;
    if (members.empty()) break;
    const SpatialIndex index(std::move(pts));
    std::vector<std::size_t> drop;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto nn = index.nearest(index.point(k), k);
      if (!nn || nn->distance_m > threshold_m) drop.push_back(members[k]);
    }
    for (auto i : drop) removed[i] = true;
    if (!cascade || drop.empty()) break;
  }

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (removed[i]) {
      result.report.removed_ids.push_back(predictions[i].patch_id);
    } else {
      result.kept.push_back(predictions[i]);
    }
  }
  std::sort(result.report.removed_ids.begin(), result.report.removed_ids.end());
  result.report.removed = result.report.removed_ids.size();
  result.report.kept = result.kept.size();
  return result;
}

}  // namespace patchwork
