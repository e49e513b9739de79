#include "patchwork/kdtree.hpp"

#include <algorithm>
#include <numeric>

#include "patchwork/error.hpp"

namespace patchwork {

namespace {

double coord(const Point2& p, int axis) { return axis == 0 ? p.x : p.y; }

double dist2(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace

KdTree::KdTree(std::vector<Point2> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points_.empty()) throw DataError("cannot build a spatial index over zero points");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
  build(0, order_.size());
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back({begin, end, -1, 0.0, 0, 0});
  if (end - begin <= leaf_size_) return id;

  double min_x = points_[order_[begin]].x, max_x = min_x;
  double min_y = points_[order_[begin]].y, max_y = min_y;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& p = points_[order_[i]];
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int axis = (max_x - min_x) >= (max_y - min_y) ? 0 : 1;
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double ca = coord(points_[a], axis);
                     const double cb = coord(points_[b], axis);
                     return ca < cb || (ca == cb && a < b);
                   });
  // Left holds coordinates <= split, right holds coordinates >= split.
  const double split = coord(points_[order_[mid]], axis);
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::nearest_rec(std::size_t node_id, const Point2& q, std::optional<std::size_t> exclude,
                         Hit& best, bool& found) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      if (exclude && *exclude == idx) continue;
      const double d = dist2(points_[idx], q);
      if (!found || d < best.dist2 || (d == best.dist2 && idx < best.index)) {
        best = {idx, d};
        found = true;
      }
    }
    return;
  }
  const double diff = coord(q, node.axis) - node.split;
  const std::size_t near = diff <= 0.0 ? node.left : node.right;
  const std::size_t far = diff <= 0.0 ? node.right : node.left;
  nearest_rec(near, q, exclude, best, found);
  // <= keeps equal-distance candidates on the far side reachable for the index tie-break.
  if (!found || diff * diff <= best.dist2) nearest_rec(far, q, exclude, best, found);
}

std::optional<KdTree::Hit> KdTree::nearest(const Point2& q, std::optional<std::size_t> exclude) const {
  Hit best;
  bool found = false;
  nearest_rec(0, q, exclude, best, found);
  if (!found) return std::nullopt;
  return best;
}

void KdTree::radius_rec(std::size_t node_id, const Point2& q, double r2,
                        std::vector<std::size_t>& out) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      if (dist2(points_[order_[i]], q) <= r2) out.push_back(order_[i]);
    }
    return;
  }
  const double diff = coord(q, node.axis) - node.split;
  if (diff <= 0.0 || diff * diff <= r2) radius_rec(node.left, q, r2, out);
  if (diff >= 0.0 || diff * diff <= r2) radius_rec(node.right, q, r2, out);
}

std::vector<std::size_t> KdTree::radius(const Point2& q, double r) const {
  std::vector<std::size_t> out;
  if (r < 0.0) return out;
  radius_rec(0, q, r * r, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace patchwork
