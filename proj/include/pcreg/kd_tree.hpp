#pragma once

#include <cstddef>
#include <vector>

#include "pcreg/point_cloud.hpp"

namespace pcreg {

/// Balanced 3D kd-tree for exact nearest-neighbour queries. Results match a
/// brute-force scan exactly: squared distances are computed the same way and
/// ties go to the lowest point index.
class KdTree {
 public:
  struct Hit {
    std::size_t index;
    double sq_distance;
  };

  explicit KdTree(const PointMatrix& points);

  Hit nearest(const Vec3& query) const;
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }

 private:
  struct Node {
    int axis = -1;         // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
    std::size_t begin = 0, end = 0;  // leaf range into order_
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const Vec3& q, Hit& best) const;

  PointMatrix points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Squared distance exactly as the kd-tree computes it.
inline double squared_distance(const Vec3& a, const Eigen::Ref<const Eigen::RowVector3d>& b) {
  const double dx = a.x() - b(0), dy = a.y() - b(1), dz = a.z() - b(2);
  return dx * dx + dy * dy + dz * dz;
}

/// Brute-force nearest neighbour with the same tie rule.
KdTree::Hit brute_force_nearest(const PointMatrix& points, const Vec3& query);

}  // namespace pcreg
