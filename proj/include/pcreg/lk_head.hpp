#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

#include "pcreg/encoder.hpp"
#include "pcreg/point_cloud.hpp"
#include "pcreg/se3.hpp"

namespace pcreg {

using FeatureFunction = std::function<GlobalFeature(const PointCloud&)>;

template <typename T>
FeatureFunction feature_function(const Model<T>& model) {
  return [&model](const PointCloud& c) { return encode(model, c); };
}

/// Precomputed inverse-compositional Lucas-Kanade data for one template.
struct LkState {
  GlobalFeature template_feature;
  Eigen::MatrixXd jacobian;        // feature_width x 6, columns follow twist (omega, v)
  Eigen::MatrixXd pseudo_inverse;  // 6 x feature_width
  double fd_step = 0.01;
  bool rank_deficient = false;
  std::string warning;
};

inline constexpr double kLkDefaultStep = 0.01;
inline constexpr double kLkDamping = 1e-6;
/// Singular value ratio below which J is treated as rank deficient.
inline constexpr double kLkRankTolerance = 1e-6;

/// Column i of J is [phi(exp(-h e_i) P_T) - phi(P_T)] / h, so that a source
/// S = exp(-xi) P_T satisfies phi(S) ~ phi(P_T) + J xi. Rank-deficient J
/// falls back to damped least squares with lambda = 1e-6.
LkState lk_precompute(const PointCloud& templ, const FeatureFunction& phi, double fd_step = kLkDefaultStep);

/// Twist update J+ (phi(S) - phi(P_T)). Throws std::runtime_error if it is
/// not finite.
Twist lk_solve(const LkState& state, const GlobalFeature& source_feature);

/// exp(lk_solve(...)): the increment to apply to the source.
Transform lk_step(const LkState& state, const GlobalFeature& source_feature);

}  // namespace pcreg
