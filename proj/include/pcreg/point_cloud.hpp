#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <vector>

namespace pcreg {

using Vec3 = Eigen::Vector3d;
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

// An ordered set of N >= 1 finite 3D points. Order carries no meaning; the
// point count is fixed once constructed.
class PointCloud {
 public:
  explicit PointCloud(PointMatrix points);
  explicit PointCloud(const std::vector<Vec3>& points);

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  const PointMatrix& points() const { return points_; }
  Vec3 point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)).transpose(); }
  Vec3 centroid() const;

  // Axis-aligned bounding box extents (max - min) per axis.
  Vec3 extent() const;

 private:
  PointMatrix points_;
};

struct Mesh {
  PointMatrix vertices;
  std::vector<std::array<int, 3>> faces;

  // Throws if any face index is out of range.
  void validate() const;
  // Drops faces whose area is zero (or below `min_area`). Returns number removed.
  std::size_t remove_degenerate_faces(double min_area = 0.0);
  double face_area(std::size_t f) const;
};

}  // namespace pcreg
