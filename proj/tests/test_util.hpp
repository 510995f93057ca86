#pragma once

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "pcreg/point_cloud.hpp"
#include "pcreg/se3.hpp"

namespace pcreg::testing {

inline constexpr double kPi = 3.14159265358979323846;

inline Transform random_transform(std::mt19937_64& rng, double max_angle = kPi, double max_t = 2.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 axis(n(rng), n(rng), n(rng));
  const double angle = max_angle * std::abs(u(rng));
  return {Rotation::about_axis(axis, angle), Vec3(u(rng), u(rng), u(rng)) * max_t};
}

inline PointCloud random_cloud(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  PointMatrix p(n, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return PointCloud(std::move(p));
}

// Matrix-only oracle for applying a homogeneous transform.
inline PointMatrix apply_matrix(const Mat4& m, const PointMatrix& p) {
  PointMatrix out(p.rows(), 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Vector4d h(p(i, 0), p(i, 1), p(i, 2), 1.0);
    out.row(i) = (m * h).head<3>().transpose();
  }
  return out;
}

// Explicit single-axis rotation matrices.
inline Mat3 rot_x(double deg) {
  const double a = deg * kPi / 180, c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}
inline Mat3 rot_y(double deg) {
  const double a = deg * kPi / 180, c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}
inline Mat3 rot_z(double deg) {
  const double a = deg * kPi / 180, c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

inline Mat4 homogeneous(const Mat3& r, const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

}  // namespace pcreg::testing
