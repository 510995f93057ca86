#include "pcreg/icp.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "pcreg/kd_tree.hpp"

namespace pcreg {

Transform best_fit_transform(const PointMatrix& src, const PointMatrix& dst) {
  if (src.rows() != dst.rows()) {
    throw std::invalid_argument("best_fit_transform: point counts differ (" + std::to_string(src.rows()) + " vs " +
                                std::to_string(dst.rows()) + ")");
  }
  if (src.rows() < 3) throw std::invalid_argument("best_fit_transform: need at least 3 point pairs");
  const Eigen::RowVector3d cs = src.colwise().mean();
  const Eigen::RowVector3d cd = dst.colwise().mean();
  const PointMatrix s = src.rowwise() - cs;
  const PointMatrix d = dst.rowwise() - cd;

  // Collinear or coincident sources leave rotation about the line free.
  const Eigen::JacobiSVD<Mat3> spread(s.transpose() * s);
  const Vec3 sv = spread.singularValues();
  if (!(sv(1) > 1e-12 * std::max(sv(0), 1e-300))) {
    throw std::invalid_argument("best_fit_transform: source points are collinear or coincident");
  }

  const Mat3 h = s.transpose() * d;
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Mat3 r = v * fix * u.transpose();
  const Vec3 t = cd.transpose() - r * cs.transpose();
  return {Rotation::from_matrix(r), t};
}

RegistrationResult icp(const PointCloud& source, const PointCloud& templ, const IcpConfig& cfg) {
  if (cfg.max_iterations < 1) throw std::invalid_argument("icp: max_iterations must be >= 1");
  if (templ.size() < 3) throw std::invalid_argument("icp: template needs at least 3 points");
  const auto t0 = std::chrono::steady_clock::now();

  const PointMatrix& tp = templ.points();
  std::optional<KdTree> tree;
  if (cfg.correspondence == IcpConfig::Correspondence::kdtree) tree.emplace(tp);

  RegistrationResult result;
  PointMatrix current = source.points();
  PointMatrix matched(current.rows(), 3);
  Transform cumulative;

  auto correspond = [&] {
    double mse = 0.0;
    for (Eigen::Index i = 0; i < current.rows(); ++i) {
      const Vec3 q = current.row(i).transpose();
      const KdTree::Hit hit = tree ? tree->nearest(q) : brute_force_nearest(tp, q);
      matched.row(i) = tp.row(static_cast<Eigen::Index>(hit.index));
      mse += hit.sq_distance;
    }
    return mse / static_cast<double>(current.rows());
  };

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const double mse_before = correspond();
    const Transform step = best_fit_transform(current, matched);
    const Mat3 r = step.rotation().matrix();
    current = (current * r.transpose()).rowwise() + step.translation().transpose();
    cumulative = compose(step, cumulative);
    const double mse_after = (current - matched).rowwise().squaredNorm().mean();

    result.trace.push_back({step, cumulative, mse_before});
    result.iterations_used = it;
    if (std::abs(mse_before - mse_after) < cfg.mse_tolerance) {
      result.converged = true;
      break;
    }
  }
  result.transform = cumulative;
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace pcreg
