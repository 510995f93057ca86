#include "pcreg/losses.hpp"

#include <limits>
#include <stdexcept>
#include <string>

#include "pcreg/errors.hpp"
#include "pcreg/kd_tree.hpp"

namespace pcreg {

LossKind parse_loss_kind(const std::string& s) {
  if (s == "chamfer") return LossKind::chamfer;
  if (s == "emd") return LossKind::emd;
  if (s == "frobenius") return LossKind::frobenius;
  throw std::invalid_argument("unknown loss kind '" + s + "' (expected chamfer, emd or frobenius)");
}

const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::chamfer: return "chamfer";
    case LossKind::emd: return "emd";
    case LossKind::frobenius: return "frobenius";
  }
  return "?";
}

std::vector<std::size_t> nearest_indices(const PointMatrix& from, const PointMatrix& to) {
  std::vector<std::size_t> nn(static_cast<std::size_t>(from.rows()));
  if (static_cast<std::size_t>(to.rows()) > kChamferKdTreeThreshold) {
    const KdTree tree(to);
    for (Eigen::Index i = 0; i < from.rows(); ++i) nn[static_cast<std::size_t>(i)] = tree.nearest(from.row(i).transpose()).index;
  } else {
    for (Eigen::Index i = 0; i < from.rows(); ++i) {
      nn[static_cast<std::size_t>(i)] = brute_force_nearest(to, from.row(i).transpose()).index;
    }
  }
  return nn;
}

namespace {

double mean_nn_sq(const PointMatrix& from, const PointMatrix& to) {
  const auto nn = nearest_indices(from, to);
  double s = 0.0;
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    s += squared_distance(from.row(i).transpose(), to.row(static_cast<Eigen::Index>(nn[static_cast<std::size_t>(i)])));
  }
  return s / static_cast<double>(from.rows());
}

void check_emd_sizes(Eigen::Index nx, Eigen::Index ny, std::size_t cap) {
  if (nx != ny) {
    throw std::invalid_argument("emd: point counts differ (" + std::to_string(nx) + " vs " + std::to_string(ny) + ")");
  }
  if (static_cast<std::size_t>(nx) > cap) {
    throw std::invalid_argument("emd: " + std::to_string(nx) + " points exceeds the cap of " + std::to_string(cap));
  }
}

double sq(const PointMatrix& x, Eigen::Index i, const PointMatrix& y, Eigen::Index j) {
  return squared_distance(x.row(i).transpose(), y.row(j));
}

}  // namespace

LossValue chamfer(const PointCloud& x, const PointCloud& y) {
  return {mean_nn_sq(x.points(), y.points()) + mean_nn_sq(y.points(), x.points()), LossKind::chamfer};
}

std::vector<std::size_t> emd_assignment(const PointMatrix& x, const PointMatrix& y) {
  // Shortest augmenting path Hungarian method with potentials, O(n^3).
  const auto n = static_cast<std::size_t>(x.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = sq(x, static_cast<Eigen::Index>(i0 - 1), y, static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> match(n);
  for (std::size_t j = 1; j <= n; ++j) match[p[j] - 1] = j - 1;
  return match;
}

LossValue emd(const PointCloud& x, const PointCloud& y, std::size_t cap) {
  check_emd_sizes(x.points().rows(), y.points().rows(), cap);
  const auto match = emd_assignment(x.points(), y.points());
  double s = 0.0;
  for (std::size_t i = 0; i < match.size(); ++i) {
    s += sq(x.points(), static_cast<Eigen::Index>(i), y.points(), static_cast<Eigen::Index>(match[i]));
  }
  return {s / static_cast<double>(match.size()), LossKind::emd};
}

LossValue frobenius_loss(const Transform& pred, const Transform& gt) {
  const Mat4 e = pred.matrix() * inverse(gt).matrix() - Mat4::Identity();
  return {e.squaredNorm(), LossKind::frobenius};
}

namespace ad {

namespace {

template <typename T>
PointMatrix to_points(const Tensor<T>& m) {
  if (m.cols() != 3) throw ShapeError("point loss: expected N x 3 input, got " + std::to_string(m.rows()) + "x" +
                                      std::to_string(m.cols()));
  return m.template cast<double>();
}

}  // namespace

template <typename T>
Var chamfer(Tape<T>& tape, Var x, Var y) {
  using M = Tensor<T>;
  const M& X = tape.value(x);
  const M& Y = tape.value(y);
  const PointMatrix xd = to_points(X), yd = to_points(Y);
  auto nn_xy = nearest_indices(xd, yd);
  auto nn_yx = nearest_indices(yd, xd);
  if (tape.tracking_branches()) {
    std::uint64_t h = 0;
    for (auto i : nn_xy) h = h * 1315423911u + i;
    for (auto i : nn_yx) h = h * 1315423911u + i;
    tape.note_branch(h);
  }
  const T inv_nx = T(1) / static_cast<T>(X.rows());
  const T inv_ny = T(1) / static_cast<T>(Y.rows());
  T a = 0, b = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) a += (X.row(i) - Y.row(static_cast<Eigen::Index>(nn_xy[static_cast<std::size_t>(i)]))).squaredNorm();
  for (Eigen::Index j = 0; j < Y.rows(); ++j) b += (Y.row(j) - X.row(static_cast<Eigen::Index>(nn_yx[static_cast<std::size_t>(j)]))).squaredNorm();
  M out(1, 1);
  out(0, 0) = a * inv_nx + b * inv_ny;
  return tape.record(std::move(out), {x, y},
                     [x, y, nn_xy = std::move(nn_xy), nn_yx = std::move(nn_yx), inv_nx, inv_ny](Tape<T>& t, const M& g) {
                       const M& Xv = t.value(x);
                       const M& Yv = t.value(y);
                       const T s = g(0, 0);
                       const bool gx = t.requires_grad(x), gy = t.requires_grad(y);
                       M* dx = gx ? &t.grad_slot(x) : nullptr;
                       M* dy = gy ? &t.grad_slot(y) : nullptr;
                       for (Eigen::Index i = 0; i < Xv.rows(); ++i) {
                         const auto j = static_cast<Eigen::Index>(nn_xy[static_cast<std::size_t>(i)]);
                         const Eigen::Matrix<T, 1, 3> d = (Xv.row(i) - Yv.row(j)) * (T(2) * inv_nx * s);
                         if (dx) dx->row(i) += d;
                         if (dy) dy->row(j) -= d;
                       }
                       for (Eigen::Index j = 0; j < Yv.rows(); ++j) {
                         const auto i = static_cast<Eigen::Index>(nn_yx[static_cast<std::size_t>(j)]);
                         const Eigen::Matrix<T, 1, 3> d = (Yv.row(j) - Xv.row(i)) * (T(2) * inv_ny * s);
                         if (dy) dy->row(j) += d;
                         if (dx) dx->row(i) -= d;
                       }
                     });
}

template <typename T>
Var emd(Tape<T>& tape, Var x, Var y, std::size_t cap) {
  using M = Tensor<T>;
  const M& X = tape.value(x);
  const M& Y = tape.value(y);
  check_emd_sizes(X.rows(), Y.rows(), cap);
  auto match = emd_assignment(to_points(X), to_points(Y));
  if (tape.tracking_branches()) {
    std::uint64_t h = 0;
    for (auto i : match) h = h * 1315423911u + i;
    tape.note_branch(h);
  }
  const T inv_n = T(1) / static_cast<T>(X.rows());
  T s = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) s += (X.row(i) - Y.row(static_cast<Eigen::Index>(match[static_cast<std::size_t>(i)]))).squaredNorm();
  M out(1, 1);
  out(0, 0) = s * inv_n;
  return tape.record(std::move(out), {x, y}, [x, y, match = std::move(match), inv_n](Tape<T>& t, const M& g) {
    const M& Xv = t.value(x);
    const M& Yv = t.value(y);
    const bool gx = t.requires_grad(x), gy = t.requires_grad(y);
    M* dx = gx ? &t.grad_slot(x) : nullptr;
    M* dy = gy ? &t.grad_slot(y) : nullptr;
    for (Eigen::Index i = 0; i < Xv.rows(); ++i) {
      const auto j = static_cast<Eigen::Index>(match[static_cast<std::size_t>(i)]);
      const Eigen::Matrix<T, 1, 3> d = (Xv.row(i) - Yv.row(j)) * (T(2) * inv_n * g(0, 0));
      if (dx) dx->row(i) += d;
      if (dy) dy->row(j) -= d;
    }
  });
}

template <typename T>
Var frobenius_loss(Tape<T>& tape, Var pred, const Transform& gt) {
  using M = Tensor<T>;
  const M& P = tape.value(pred);
  if (P.rows() != 4 || P.cols() != 4) throw ShapeError("frobenius_loss: expected a 4x4 matrix");
  const Eigen::Matrix<T, 4, 4> gt_inv = inverse(gt).matrix().cast<T>();
  const Eigen::Matrix<T, 4, 4> e = P * gt_inv - Eigen::Matrix<T, 4, 4>::Identity();
  M out(1, 1);
  out(0, 0) = e.squaredNorm();
  return tape.record(std::move(out), {pred}, [pred, gt_inv](Tape<T>& t, const M& g) {
    const Eigen::Matrix<T, 4, 4> pv = t.value(pred);
    const Eigen::Matrix<T, 4, 4> err = pv * gt_inv - Eigen::Matrix<T, 4, 4>::Identity();
    const Eigen::Matrix<T, 4, 4> d = (T(2) * g(0, 0)) * err * gt_inv.transpose();
    t.grad_slot(pred) += M(d);
  });
}

template Var chamfer<float>(Tape<float>&, Var, Var);
template Var chamfer<double>(Tape<double>&, Var, Var);
template Var emd<float>(Tape<float>&, Var, Var, std::size_t);
template Var emd<double>(Tape<double>&, Var, Var, std::size_t);
template Var frobenius_loss<float>(Tape<float>&, Var, const Transform&);
template Var frobenius_loss<double>(Tape<double>&, Var, const Transform&);

}  // namespace ad

}  // namespace pcreg
