#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace patchwork {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Static 2-d tree over planar points. Immutable after construction, so
/// concurrent queries are safe.
class KdTree {
 public:
  explicit KdTree(std::vector<Point2> points, std::size_t leaf_size = 16);

  struct Hit {
    std::size_t index = 0;
    double dist2 = 0.0;
  };

  std::size_t size() const { return points_.size(); }
  const Point2& point(std::size_t i) const { return points_[i]; }

  /// Closest point to q other than `exclude`; equal distances resolve to the
  /// lower index. Empty when no candidate exists.
  std::optional<Hit> nearest(const Point2& q, std::optional<std::size_t> exclude = {}) const;

  /// Indices with squared distance <= r^2, ascending.
  std::vector<std::size_t> radius(const Point2& q, double r) const;

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end);
  void nearest_rec(std::size_t node, const Point2& q, std::optional<std::size_t> exclude,
                   Hit& best, bool& found) const;
  void radius_rec(std::size_t node, const Point2& q, double r2, std::vector<std::size_t>& out) const;

  std::vector<Point2> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

}  // namespace patchwork
