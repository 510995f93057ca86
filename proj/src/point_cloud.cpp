#include "pcreg/point_cloud.hpp"

#include <stdexcept>
#include <string>

#include <Eigen/Geometry>

namespace pcreg {

PointCloud::PointCloud(PointMatrix points) : points_(std::move(points)) {
  if (points_.rows() == 0) throw std::invalid_argument("point cloud must contain at least one point");
  if (!points_.allFinite()) throw std::invalid_argument("point cloud has non-finite coordinates");
}

PointCloud::PointCloud(const std::vector<Vec3>& points)
    : PointCloud([&] {
        PointMatrix m(static_cast<Eigen::Index>(points.size()), 3);
        for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
        return m;
      }()) {}

Vec3 PointCloud::centroid() const { return points_.colwise().mean().transpose(); }

Vec3 PointCloud::extent() const {
  return (points_.colwise().maxCoeff() - points_.colwise().minCoeff()).transpose();
}

void Mesh::validate() const {
  const auto v = static_cast<int>(vertices.rows());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int idx : faces[f]) {
      if (idx < 0 || idx >= v) {
        throw std::out_of_range("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                                " but mesh has " + std::to_string(v) + " vertices");
      }
    }
  }
}

double Mesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  const Vec3 a = vertices.row(t[0]).transpose();
  const Vec3 b = vertices.row(t[1]).transpose();
  const Vec3 c = vertices.row(t[2]).transpose();
  return 0.5 * (b - a).cross(c - a).norm();
}

std::size_t Mesh::remove_degenerate_faces(double min_area) {
  std::vector<std::array<int, 3>> kept;
  kept.reserve(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (face_area(f) > min_area) kept.push_back(faces[f]);
  }
  const std::size_t removed = faces.size() - kept.size();
  faces = std::move(kept);
  return removed;
}

}  // namespace pcreg
