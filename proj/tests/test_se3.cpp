#include <doctest.h>

#include <Eigen/LU>

#include "pcreg/errors.hpp"
#include "pcreg/se3.hpp"
#include "test_util.hpp"

using namespace pcreg;
using namespace pcreg::testing;

namespace {

double max_abs(const Mat4& a, const Mat4& b) { return (a - b).cwiseAbs().maxCoeff(); }

Transform from_rz(double deg) { return Transform(Rotation::from_matrix(rot_z(deg)), Vec3::Zero()); }

// Rodrigues formula, written out independently of the library.
Mat3 rodrigues(const Vec3& w) {
  const double th = w.norm();
  if (th == 0) return Mat3::Identity();
  const Vec3 k = w / th;
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(th) * kx + (1 - std::cos(th)) * kx * kx;
}

}  // namespace

TEST_CASE("rotation constructors normalize and canonicalize") {
  Rotation r(Eigen::Quaterniond(-2, 0.2, -0.4, 1.0));
  CHECK(std::abs(r.quaternion().norm() - 1.0) < 1e-9);
  const Rotation c = r.canonicalized();
  CHECK(c.quaternion().w() >= 0);
  CHECK((c.matrix() - r.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(Rotation(Eigen::Quaterniond(0, 0, 0, 1e-13)), DegeneratePose);
}

TEST_CASE("compose examples and matrix oracle") {
  std::mt19937_64 rng(1);
  const Transform t = random_transform(rng);
  CHECK(max_abs(compose(t, Transform::identity()).matrix(), t.matrix()) < 1e-12);
  CHECK(max_abs(compose(from_rz(30), from_rz(15)).matrix(), homogeneous(rot_z(45), Vec3::Zero())) < 1e-12);

  for (int trial = 0; trial < 50; ++trial) {
    Transform acc;
    Mat4 oracle = Mat4::Identity();
    for (int i = 0; i < 8; ++i) {
      const Transform x = random_transform(rng);
      acc = compose(x, acc);
      oracle = x.matrix() * oracle;
    }
    CHECK(max_abs(acc.matrix(), oracle) < 1e-9);
  }
  // compose(a, b).apply(p) == a.apply(b.apply(p))
  const Transform a = random_transform(rng), b = random_transform(rng);
  const Vec3 p(0.3, -1.2, 2.0);
  CHECK((compose(a, b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
}

TEST_CASE("associativity over random triples") {
  std::mt19937_64 rng(2);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const Transform a = random_transform(rng), b = random_transform(rng), c = random_transform(rng);
    worst = std::max(worst, max_abs(compose(compose(a, b), c).matrix(), compose(a, compose(b, c)).matrix()));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("inverse") {
  CHECK(max_abs(inverse(Transform::identity()).matrix(), Mat4::Identity()) < 1e-15);
  const Transform t = inverse(Transform::translation_only(Vec3(1, 2, 3)));
  CHECK((t.translation() - Vec3(-1, -2, -3)).norm() < 1e-15);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Transform x = random_transform(rng);
    CHECK(max_abs(inverse(x).matrix(), x.matrix().inverse()) < 1e-9);
    CHECK(max_abs(compose(x, inverse(x)).matrix(), Mat4::Identity()) < 1e-9);
  }
}

TEST_CASE("apply") {
  std::mt19937_64 rng(4);
  const PointCloud cloud = random_cloud(rng, 50);
  CHECK((apply(Transform::identity(), cloud).points() - cloud.points()).cwiseAbs().maxCoeff() == 0.0);
  const PointCloud x = apply(from_rz(90), PointCloud(std::vector<Vec3>{Vec3(1, 0, 0)}));
  CHECK((x.point(0) - Vec3(0, 1, 0)).norm() < 1e-9);

  const Transform t = random_transform(rng);
  const PointCloud moved = apply(t, cloud);
  CHECK(moved.size() == cloud.size());
  CHECK((apply(inverse(t), moved).points() - cloud.points()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((moved.points() - apply_matrix(t.matrix(), cloud.points())).cwiseAbs().maxCoeff() < 1e-12);
  // Distances preserved.
  for (int i = 0; i + 1 < 50; ++i) {
    const double d0 = (cloud.point(i) - cloud.point(i + 1)).norm();
    const double d1 = (moved.point(i) - moved.point(i + 1)).norm();
    CHECK(std::abs(d0 - d1) <= 1e-9 * d0);
  }
}

TEST_CASE("pose_to_transform") {
  Eigen::Matrix<double, 7, 1> v;
  v << 1, 0, 0, 0, 0, 0, 0;
  CHECK(max_abs(pose_to_transform(PoseVector::quaternion7(v)).matrix(), Mat4::Identity()) < 1e-15);
  v << 2, 0, 0, 0, 1, 0, 0;
  const Transform t = pose_to_transform(PoseVector::quaternion7(v));
  CHECK(max_abs(t.matrix(), homogeneous(Mat3::Identity(), Vec3(1, 0, 0))) < 1e-15);

  Twist xi;
  xi << 0, 0, kPi / 2, 0, 0, 0;
  CHECK(max_abs(pose_to_transform(PoseVector::twist6(xi)).matrix(), homogeneous(rodrigues(Vec3(0, 0, kPi / 2)), Vec3::Zero())) <
        1e-12);

  v << 1e-13, 0, 0, 0, 1, 2, 3;
  CHECK_THROWS_AS(pose_to_transform(PoseVector::quaternion7(v)), DegeneratePose);
  v << std::nan(""), 0, 0, 0, 0, 0, 0;
  CHECK_THROWS_AS(pose_to_transform(PoseVector::quaternion7(v)), DegeneratePose);
}

TEST_CASE("quaternion7 conversion is scale invariant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1), s(0.01, 100);
  for (int i = 0; i < 200; ++i) {
    Eigen::Matrix<double, 7, 1> v;
    for (int k = 0; k < 7; ++k) v(k) = u(rng);
    Eigen::Matrix<double, 7, 1> w = v;
    w.head<4>() *= s(rng);
    const Mat4 a = pose_to_transform(PoseVector::quaternion7(v)).matrix();
    const Mat4 b = pose_to_transform(PoseVector::quaternion7(w)).matrix();
    CHECK(max_abs(a, b) < 1e-12);
  }
}

TEST_CASE("exp and log") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    Twist xi;
    for (int k = 0; k < 6; ++k) xi(k) = u(rng);
    Vec3 w = xi.head<3>();
    if (w.norm() > 0) w *= (kPi - 0.1) * std::abs(u(rng)) / w.norm();
    xi.head<3>() = w;
    // Rotation block against Rodrigues; translation against V v.
    const Transform t = se3_exp(xi);
    const double th = w.norm();
    const Mat3 k = skew(w);
    const Mat3 v = Mat3::Identity() + (1 - std::cos(th)) / (th * th) * k + (th - std::sin(th)) / (th * th * th) * k * k;
    CHECK(max_abs(t.matrix(), homogeneous(rodrigues(w), v * xi.tail<3>())) < 1e-9);
    worst = std::max(worst, (se3_log(t) - xi).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
  // Tiny angles go through the series branch.
  Twist small;
  small << 1e-9, -2e-9, 3e-9, 0.1, 0.2, 0.3;
  CHECK((se3_log(se3_exp(small)) - small).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((se3_log(Transform::identity())).norm() == 0.0);
}

TEST_CASE("euler convention is intrinsic z-y-x") {
  CHECK(max_abs(euler_to_transform(Vec3::Zero(), Vec3::Zero()).matrix(), Mat4::Identity()) < 1e-15);
  CHECK(max_abs(euler_to_transform(Vec3(0, 0, 45), Vec3::Zero()).matrix(), homogeneous(rot_z(45), Vec3::Zero())) < 1e-12);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> a(-180, 180);
  for (int i = 0; i < 200; ++i) {
    const Vec3 ang(a(rng), a(rng), a(rng)), t(0.1, -0.2, 0.3);
    const Mat4 oracle = homogeneous(rot_z(ang.z()) * rot_y(ang.y()) * rot_x(ang.x()), t);
    CHECK(max_abs(euler_to_transform(ang, t).matrix(), oracle) < 1e-12);
  }
}

TEST_CASE("rotation_error") {
  std::mt19937_64 rng(8);
  const Transform g = random_transform(rng);
  CHECK(rotation_error(g, g) < 1e-6);
  const Transform p = compose(g, Transform(Rotation::from_matrix(rot_x(10)), Vec3::Zero()));
  CHECK(std::abs(rotation_error(p, g) - 10.0) < 1e-9);
  for (int i = 0; i < 200; ++i) {
    const Transform a = random_transform(rng), b = random_transform(rng);
    const Mat3 rel = a.rotation().matrix() * b.rotation().matrix().transpose();
    const double oracle = std::acos(std::clamp((rel.trace() - 1) / 2, -1.0, 1.0)) * 180 / kPi;
    const double e = rotation_error(a, b);
    CHECK(std::abs(e - oracle) < 1e-6);
    CHECK(e >= 0);
    CHECK(e <= 180);
    CHECK(std::abs(e - rotation_error(b, a)) < 1e-9);
    const Transform c = random_transform(rng);
    CHECK(std::abs(e - rotation_error(compose(c, a), compose(c, b))) < 1e-8);
  }
}

TEST_CASE("translation_error and frobenius_deviation") {
  std::mt19937_64 rng(9);
  const Transform g = random_transform(rng);
  CHECK(translation_error(g, g) == 0.0);
  const Transform p(g.rotation(), g.translation() + Vec3(3, 4, 0));
  CHECK(std::abs(translation_error(p, g) - 5.0) < 1e-12);
  CHECK(frobenius_deviation(g, g) < 1e-12);
  CHECK(std::abs(frobenius_deviation(Transform::identity(), Transform::translation_only(Vec3(1, 0, 0))) - 1.0) < 1e-15);
  for (int i = 0; i < 100; ++i) {
    const Transform a = random_transform(rng), b = random_transform(rng);
    const Vec3 d = a.translation() - b.translation();
    CHECK(std::abs(translation_error(a, b) - std::sqrt(d(0) * d(0) + d(1) * d(1) + d(2) * d(2))) < 1e-12);
    const Mat4 e = a.matrix() * b.matrix().inverse() - Mat4::Identity();
    double ss = 0;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) ss += e(r, c) * e(r, c);
    CHECK(std::abs(frobenius_deviation(a, b) - std::sqrt(ss)) < 1e-9);
  }
}

TEST_CASE("matrix text round trip") {
  std::mt19937_64 rng(10);
  const Transform t = random_transform(rng);
  const Transform back = parse_matrix(format_matrix(t));
  CHECK(max_abs(back.matrix(), t.matrix()) < 1e-15);
  CHECK_THROWS(parse_matrix("1 2 3"));
  CHECK_THROWS(parse_matrix(format_matrix(t) + " 7"));
}
