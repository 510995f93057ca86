#include "pcreg/cloud_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace pcreg {

namespace {

PointCloud gather(const PointCloud& cloud, const std::vector<std::size_t>& idx) {
  PointMatrix out(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = cloud.points().row(static_cast<Eigen::Index>(idx[i]));
  }
  return PointCloud(std::move(out));
}

void require_count(std::size_t n, std::size_t available, const char* op) {
  if (n == 0) throw std::invalid_argument(std::string(op) + ": requested 0 points");
  if (n > available) {
    throw std::invalid_argument(std::string(op) + ": requested " + std::to_string(n) + " points from a cloud of " +
                                std::to_string(available));
  }
}

}  // namespace

PointCloud sample_mesh(const Mesh& mesh, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("sample_mesh: m must be >= 1");
  mesh.validate();
  std::vector<double> cumulative;
  std::vector<std::size_t> face_ids;
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const double a = mesh.face_area(f);
    if (a <= 0.0) continue;
    total += a;
    cumulative.push_back(total);
    face_ids.push_back(f);
  }
  if (face_ids.empty()) throw std::invalid_argument("sample_mesh: mesh has no face with positive area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointMatrix out(static_cast<Eigen::Index>(m), 3);
  for (std::size_t i = 0; i < m; ++i) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& tri = mesh.faces[face_ids[static_cast<std::size_t>(it - cumulative.begin())]];
    double r1 = unit(rng);
    double r2 = unit(rng);
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    const Vec3 a = mesh.vertices.row(tri[0]).transpose();
    const Vec3 b = mesh.vertices.row(tri[1]).transpose();
    const Vec3 c = mesh.vertices.row(tri[2]).transpose();
    out.row(static_cast<Eigen::Index>(i)) = (a + r1 * (b - a) + r2 * (c - a)).transpose();
  }
  return PointCloud(std::move(out));
}

std::vector<std::size_t> farthest_point_indices(const PointCloud& cloud, std::size_t n, std::size_t start) {
  require_count(n, cloud.size(), "farthest_point_sample");
  if (start >= cloud.size()) throw std::out_of_range("farthest_point_sample: start index out of range");
  const auto& p = cloud.points();
  std::vector<double> min_d2(cloud.size(), std::numeric_limits<double>::infinity());
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  std::size_t current = start;
  for (std::size_t k = 0; k < n; ++k) {
    chosen.push_back(current);
    min_d2[current] = -1.0;  // never picked again
    std::size_t best = 0;
    double best_d2 = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (min_d2[i] < 0.0) continue;
      const double d2 = (p.row(static_cast<Eigen::Index>(i)) - p.row(static_cast<Eigen::Index>(current))).squaredNorm();
      min_d2[i] = std::min(min_d2[i], d2);
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    current = best;
  }
  return chosen;
}

PointCloud farthest_point_sample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  require_count(n, cloud.size(), "farthest_point_sample");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  return gather(cloud, farthest_point_indices(cloud, n, pick(rng)));
}

PointCloud normalize_unit_box(const PointCloud& cloud) {
  const double scale = cloud.extent().maxCoeff();
  if (!(scale > 0.0)) throw std::invalid_argument("normalize_unit_box: cloud has zero extent");
  PointMatrix p = cloud.points() / scale;
  const Eigen::RowVector3d mean = p.colwise().mean();
  p.rowwise() -= mean;
  return PointCloud(std::move(p));
}

PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("add_gaussian_noise: sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return cloud;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  PointMatrix p = cloud.points();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (int c = 0; c < 3; ++c) p(i, c) += noise(rng);
  }
  return PointCloud(std::move(p));
}

PointCloud make_partial_along(const PointCloud& cloud, double keep_fraction, const Vec3& direction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("make_partial: keep_fraction must lie in (0, 1]");
  }
  // The small slack keeps e.g. 0.3 * 10 from rounding up to 4.
  const auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(cloud.size()) - 1e-9));
  if (keep == 0) throw std::invalid_argument("make_partial: no points would remain");
  const Vec3 d = direction.normalized();
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> proj(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) proj[i] = cloud.point(i).dot(d);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return proj[a] > proj[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return gather(cloud, order);
}

PointCloud make_partial(const PointCloud& cloud, double keep_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 d;
  do {
    d = Vec3(g(rng), g(rng), g(rng));
  } while (d.norm() < 1e-9);
  return make_partial_along(cloud, keep_fraction, d);
}

PointCloud sparsify(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  require_count(n, cloud.size(), "sparsify");
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return gather(cloud, idx);
}

}  // namespace pcreg
