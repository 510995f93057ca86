#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>
#include <string_view>

#include "pcreg/point_cloud.hpp"

namespace pcreg {

using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Twist = Eigen::Matrix<double, 6, 1>;  // (omega, v)

/// Unit quaternion rotation, stored as (w, x, y, z).
class Rotation {
 public:
  Rotation() = default;
  /// Normalizes `q`; throws DegeneratePose if its norm is <= 1e-12.
  explicit Rotation(const Eigen::Quaterniond& q);

  static Rotation from_matrix(const Mat3& r);
  static Rotation about_axis(const Vec3& axis, double angle_rad);

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  /// Same rotation with w >= 0.
  Rotation canonicalized() const;
  /// Rotation angle in [0, pi].
  double angle() const;
  Vec3 rotate(const Vec3& p) const { return q_ * p; }
  Rotation inverse() const;
  Rotation operator*(const Rotation& other) const;

 private:
  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

/// Rigid-body transform p -> R p + t.
class Transform {
 public:
  Transform() = default;
  Transform(const Rotation& r, const Vec3& t) : rotation_(r), translation_(t) {}

  static Transform identity() { return {}; }
  static Transform translation_only(const Vec3& t) { return {Rotation(), t}; }
  /// Reads the top 3x4 block; the rotation block is re-orthonormalized.
  static Transform from_matrix(const Mat4& m);

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat4 matrix() const;
  Vec3 apply(const Vec3& p) const { return rotation_.rotate(p) + translation_; }

 private:
  Rotation rotation_;
  Vec3 translation_ = Vec3::Zero();
};

/// compose(a, b) applies b first, then a.
Transform compose(const Transform& a, const Transform& b);
Transform inverse(const Transform& t);
/// Throws on an empty cloud (a PointCloud cannot be empty, so this never fires
/// for valid inputs).
PointCloud apply(const Transform& t, const PointCloud& cloud);

/// Network-facing pose parameterizations.
struct PoseVector {
  enum class Kind { quaternion7, twist6 };

  Kind kind = Kind::quaternion7;
  Eigen::VectorXd values = (Eigen::VectorXd(7) << 1, 0, 0, 0, 0, 0, 0).finished();

  static PoseVector quaternion7(const Eigen::Matrix<double, 7, 1>& v);
  static PoseVector twist6(const Twist& v);
};

/// quaternion7 is (qw, qx, qy, qz, tx, ty, tz), not necessarily unit norm.
/// Throws DegeneratePose when the quaternion norm is <= 1e-12.
Transform pose_to_transform(const PoseVector& p);

/// SE(3) exponential and logarithm on twists (omega, v).
Transform se3_exp(const Twist& xi);
Twist se3_log(const Transform& t);

Mat3 skew(const Vec3& w);

/// Intrinsic Z-Y-X Euler angles in degrees: R = Rz(z) * Ry(y) * Rx(x), where
/// `angles_deg` = (x, y, z).
Transform euler_to_transform(const Vec3& angles_deg, const Vec3& translation);

/// Angle of pred.R * gt.R^T in degrees, in [0, 180].
double rotation_error(const Transform& pred, const Transform& gt);
double translation_error(const Transform& pred, const Transform& gt);
/// || M(a) * M(b)^-1 - I ||_F with M the 4x4 homogeneous matrix.
double frobenius_deviation(const Transform& a, const Transform& b);

/// 16 whitespace-separated decimals, row-major, 17 significant digits.
std::string format_matrix(const Transform& t);
/// Parses 16 numbers (row-major 4x4). Throws std::runtime_error when malformed.
Transform parse_matrix(std::string_view text);

}  // namespace pcreg
