#pragma once

#include "pcreg/point_cloud.hpp"
#include "pcreg/result.hpp"
#include "pcreg/se3.hpp"

namespace pcreg {

struct IcpConfig {
  enum class Correspondence { kdtree, brute };

  int max_iterations = 100;
  /// Stop once the correspondence MSE changes by less than this.
  double mse_tolerance = 1e-12;
  Correspondence correspondence = Correspondence::kdtree;
};

/// Least-squares rigid transform taking src[i] onto dst[i] (Kabsch with
/// reflection correction). Needs >= 3 pairs that are not all collinear.
Transform best_fit_transform(const PointMatrix& src, const PointMatrix& dst);

/// Point-to-point ICP aligning `source` onto `templ`. The trace records the
/// correspondence MSE at the start of each iteration, which is
/// non-increasing.
RegistrationResult icp(const PointCloud& source, const PointCloud& templ, const IcpConfig& cfg = {});

}  // namespace pcreg
