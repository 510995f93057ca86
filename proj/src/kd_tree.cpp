#include "pcreg/kd_tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace pcreg {

namespace {
constexpr std::size_t kLeafSize = 8;

inline bool better(double d2, std::size_t idx, const KdTree::Hit& best) {
  return d2 < best.sq_distance || (d2 == best.sq_distance && idx < best.index);
}
}  // namespace

KdTree::KdTree(const PointMatrix& points) : points_(points), order_(static_cast<std::size_t>(points.rows())) {
  std::iota(order_.begin(), order_.end(), 0);
  if (!order_.empty()) root_ = build(0, order_.size());
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  // Split along the axis of largest spread.
  Eigen::RowVector3d lo = points_.row(static_cast<Eigen::Index>(order_[begin]));
  Eigen::RowVector3d hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_.row(static_cast<Eigen::Index>(order_[i])));
    hi = hi.cwiseMax(points_.row(static_cast<Eigen::Index>(order_[i])));
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                     const double pa = points_(static_cast<Eigen::Index>(a), axis);
                     const double pb = points_(static_cast<Eigen::Index>(b), axis);
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_(static_cast<Eigen::Index>(order_[mid]), axis);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node_id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d2 = squared_distance(q, points_.row(static_cast<Eigen::Index>(idx)));
      if (better(d2, idx, best)) best = {idx, d2};
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q(node.axis) - node.split;
  const int near = diff < 0 ? node.left : node.right;
  const int far = diff < 0 ? node.right : node.left;
  search(near, q, best);
  // <= so that equal-distance points with a lower index are still visited.
  if (diff * diff <= best.sq_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
  Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  if (root_ >= 0) search(root_, query, best);
  return best;
}

KdTree::Hit brute_force_nearest(const PointMatrix& points, const Vec3& query) {
  KdTree::Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double d2 = squared_distance(query, points.row(i));
    if (better(d2, static_cast<std::size_t>(i), best)) best = {static_cast<std::size_t>(i), d2};
  }
  return best;
}

}  // namespace pcreg
