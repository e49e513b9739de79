#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchwork/geo.hpp"
#include "patchwork/kdtree.hpp"
#include "patchwork/predictions.hpp"

namespace patchwork {

/// Geographic point index with exact haversine answers. Points are projected
/// equirectangularly about the mid-latitude for the tree; candidates are then
/// re-ranked by great-circle distance. Longitudes are assumed not to wrap.
class SpatialIndex {
 public:
  explicit SpatialIndex(std::vector<geo::GeoPoint> points, std::size_t leaf_size = 16);

  struct Neighbor {
    std::size_t index = 0;
    double distance_m = 0.0;
  };

  std::size_t size() const { return points_.size(); }
  const geo::GeoPoint& point(std::size_t i) const { return points_[i]; }

  /// Nearest point by haversine distance (ties to the lower index).
  std::optional<Neighbor> nearest(const geo::GeoPoint& q,
                                  std::optional<std::size_t> exclude = {}) const;
  /// Indices within radius_m by haversine distance, ascending.
  std::vector<std::size_t> within(const geo::GeoPoint& q, double radius_m) const;

 private:
  Point2 project(const geo::GeoPoint& p) const;
  /// Upper bound on planar / great-circle distance for paths touching q.
  double planar_stretch(const geo::GeoPoint& q) const;
  std::vector<std::size_t> scan_within(const geo::GeoPoint& q, double radius_m) const;

  std::vector<geo::GeoPoint> points_;
  double cos_ref_ = 1.0;
  double min_lat_ = 0.0;
  double max_lat_ = 0.0;
  KdTree tree_;
};

inline constexpr double kNoNeighbor = std::numeric_limits<double>::infinity();

/// Distance from predictions[index] to the closest other patch with `label`;
/// kNoNeighbor when there is none.
double nearest_same_label(const std::vector<PredictionRecord>& predictions, int label,
                          std::size_t index);

struct FilterReport {
  int label = 0;
  double threshold_m = 250.0;
  bool cascade = false;
  std::size_t passes = 0;
  std::size_t removed = 0;
  std::size_t kept = 0;
  std::vector<std::string> removed_ids;

  nlohmann::json to_json() const;
};

struct FilterResult {
  FilterReport report;
  std::vector<PredictionRecord> kept;
};

/// Removes `label` patches whose nearest same-label neighbour is farther than
/// threshold_m, judged against the original set in one pass. With cascade the
/// pass repeats on the survivors until nothing changes. Other labels and
/// failed records are kept untouched.
FilterResult remove_isolated(const std::vector<PredictionRecord>& predictions, int label,
                             double threshold_m = 250.0, bool cascade = false);

}  // namespace patchwork
