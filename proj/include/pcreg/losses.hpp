#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pcreg/autodiff.hpp"
#include "pcreg/point_cloud.hpp"
#include "pcreg/se3.hpp"

namespace pcreg {

enum class LossKind { chamfer, emd, frobenius };

struct LossValue {
  double value = 0.0;
  LossKind kind = LossKind::chamfer;
};

LossKind parse_loss_kind(const std::string& s);
const char* to_string(LossKind k);

/// Point counts above this use the kd-tree for nearest neighbours inside
/// chamfer(); results are identical either way.
inline constexpr std::size_t kChamferKdTreeThreshold = 256;
/// Default cap on EMD problem size (the solver is cubic).
inline constexpr std::size_t kDefaultEmdCap = 512;

/// Mean squared nearest-neighbour distance x -> y plus y -> x.
LossValue chamfer(const PointCloud& x, const PointCloud& y);

/// Minimum-cost perfect matching under squared distance, divided by N.
/// Throws std::invalid_argument on unequal sizes or N > cap.
LossValue emd(const PointCloud& x, const PointCloud& y, std::size_t cap = kDefaultEmdCap);
/// Optimal assignment: result[i] is the y-index matched to x-row i.
std::vector<std::size_t> emd_assignment(const PointMatrix& x, const PointMatrix& y);

/// || M(pred) M(gt)^-1 - I ||_F^2.
LossValue frobenius_loss(const Transform& pred, const Transform& gt);

/// Nearest neighbour of every row of `from` within `to` (kd-tree above the
/// threshold, brute force below).
std::vector<std::size_t> nearest_indices(const PointMatrix& from, const PointMatrix& to);

namespace ad {

/// Differentiable versions. Either argument may be constant or differentiable.
template <typename T>
Var chamfer(Tape<T>& tape, Var x, Var y);
/// Gradient follows the optimal matching, held fixed.
template <typename T>
Var emd(Tape<T>& tape, Var x, Var y, std::size_t cap = kDefaultEmdCap);
/// `pred` is a 4 x 4 homogeneous matrix on the tape.
template <typename T>
Var frobenius_loss(Tape<T>& tape, Var pred, const Transform& gt);

}  // namespace ad

}  // namespace pcreg
