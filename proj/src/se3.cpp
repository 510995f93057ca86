#include "pcreg/se3.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <Eigen/SVD>

#include "pcreg/errors.hpp"

namespace pcreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::Quaterniond normalized_or_throw(const Eigen::Quaterniond& q) {
  const double n = q.coeffs().norm();
  if (!std::isfinite(n) || n <= 1e-12) {
    throw DegeneratePose("quaternion norm " + std::to_string(n) + " is not usable as a rotation");
  }
  return Eigen::Quaterniond(q.coeffs() / n);
}

}  // namespace

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(normalized_or_throw(q)) {}

Rotation Rotation::from_matrix(const Mat3& r) {
  // Project onto SO(3) first so that slightly non-orthonormal inputs are safe.
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Mat3 proj = svd.matrixU() * d * svd.matrixV().transpose();
  return Rotation(Eigen::Quaterniond(proj));
}

Rotation Rotation::about_axis(const Vec3& axis, double angle_rad) {
  return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())));
}

Rotation Rotation::canonicalized() const {
  Rotation r = *this;
  if (r.q_.w() < 0) r.q_.coeffs() = -r.q_.coeffs();
  return r;
}

double Rotation::angle() const {
  const Eigen::Quaterniond c = canonicalized().q_;
  // atan2 form is accurate near both 0 and pi.
  return 2.0 * std::atan2(c.vec().norm(), c.w());
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

Rotation Rotation::operator*(const Rotation& other) const { return Rotation(q_ * other.q_); }

Transform Transform::from_matrix(const Mat4& m) {
  return {Rotation::from_matrix(m.topLeftCorner<3, 3>()), m.topRightCorner<3, 1>()};
}

Mat4 Transform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_.matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Transform compose(const Transform& a, const Transform& b) {
  return {a.rotation() * b.rotation(), a.rotation().rotate(b.translation()) + a.translation()};
}

Transform inverse(const Transform& t) {
  const Rotation r_inv = t.rotation().inverse();
  return {r_inv, -r_inv.rotate(t.translation())};
}

PointCloud apply(const Transform& t, const PointCloud& cloud) {
  const Mat3 r = t.rotation().matrix();
  PointMatrix out = cloud.points() * r.transpose();
  out.rowwise() += t.translation().transpose();
  return PointCloud(std::move(out));
}

PoseVector PoseVector::quaternion7(const Eigen::Matrix<double, 7, 1>& v) {
  PoseVector p;
  p.kind = Kind::quaternion7;
  p.values = v;
  return p;
}

PoseVector PoseVector::twist6(const Twist& v) {
  PoseVector p;
  p.kind = Kind::twist6;
  p.values = v;
  return p;
}

Transform pose_to_transform(const PoseVector& p) {
  if (!p.values.allFinite()) throw DegeneratePose("pose vector has non-finite entries");
  switch (p.kind) {
    case PoseVector::Kind::quaternion7: {
      if (p.values.size() != 7) throw std::invalid_argument("quaternion7 pose needs 7 values");
      const Eigen::Quaterniond q(p.values(0), p.values(1), p.values(2), p.values(3));
      return {Rotation(q), p.values.tail<3>()};
    }
    case PoseVector::Kind::twist6: {
      if (p.values.size() != 6) throw std::invalid_argument("twist6 pose needs 6 values");
      return se3_exp(p.values.head<6>());
    }
  }
  throw std::invalid_argument("unknown pose kind");
}

Mat3 skew(const Vec3& w) {
  Mat3 k;
  k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return k;
}

Transform se3_exp(const Twist& xi) {
  const Vec3 w = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  const double theta = w.norm();
  const Mat3 k = skew(w);
  const Mat3 k2 = k * k;
  double a, b;  // V = I + a K + b K^2
  if (theta < 1e-5) {
    const double t2 = theta * theta;
    a = 0.5 - t2 / 24.0;
    b = 1.0 / 6.0 - t2 / 120.0;
  } else {
    a = (1.0 - std::cos(theta)) / (theta * theta);
    b = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  const Mat3 v_mat = Mat3::Identity() + a * k + b * k2;
  Rotation r;
  if (theta < 1e-12) {
    // First-order quaternion keeps tiny rotations exact to double precision.
    r = Rotation(Eigen::Quaterniond(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z()));
  } else {
    r = Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(theta, w / theta)));
  }
  return {r, v_mat * v};
}

Twist se3_log(const Transform& t) {
  const Eigen::Quaterniond q = t.rotation().canonicalized().quaternion();
  const double s = q.vec().norm();
  const double theta = 2.0 * std::atan2(s, q.w());
  Vec3 w;
  if (s < 1e-12) {
    w = 2.0 * q.vec() / q.w();
  } else {
    w = q.vec() * (theta / s);
  }
  const Mat3 k = skew(w);
  double c;  // V^-1 = I - K/2 + c K^2
  if (theta < 1e-5) {
    c = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    c = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
  }
  const Mat3 v_inv = Mat3::Identity() - 0.5 * k + c * k * k;
  Twist xi;
  xi.head<3>() = w;
  xi.tail<3>() = v_inv * t.translation();
  return xi;
}

Transform euler_to_transform(const Vec3& angles_deg, const Vec3& translation) {
  const Vec3 a = angles_deg * (kPi / 180.0);
  const Eigen::Quaterniond q = Eigen::AngleAxisd(a.z(), Vec3::UnitZ()) *
                               Eigen::AngleAxisd(a.y(), Vec3::UnitY()) *
                               Eigen::AngleAxisd(a.x(), Vec3::UnitX());
  return {Rotation(q), translation};
}

double rotation_error(const Transform& pred, const Transform& gt) {
  const Rotation rel = pred.rotation() * gt.rotation().inverse();
  return rel.angle() * (180.0 / kPi);
}

double translation_error(const Transform& pred, const Transform& gt) {
  return (pred.translation() - gt.translation()).norm();
}

double frobenius_deviation(const Transform& a, const Transform& b) {
  return (a.matrix() * inverse(b).matrix() - Mat4::Identity()).norm();
}

std::string format_matrix(const Transform& t) {
  const Mat4 m = t.matrix();
  std::ostringstream os;
  os << std::setprecision(17);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      os << m(r, c) << (c == 3 ? '\n' : ' ');
    }
  }
  return os.str();
}

Transform parse_matrix(std::string_view text) {
  std::istringstream is{std::string(text)};
  Mat4 m;
  for (int i = 0; i < 16; ++i) {
    if (!(is >> m(i / 4, i % 4))) {
      throw std::runtime_error("transform matrix: expected 16 numbers, got " + std::to_string(i));
    }
  }
  std::string rest;
  if (is >> rest) throw std::runtime_error("transform matrix: trailing data '" + rest + "'");
  return Transform::from_matrix(m);
}

}  // namespace pcreg
