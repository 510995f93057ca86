#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "pcreg/autodiff.hpp"
#include "pcreg/model.hpp"
#include "pcreg/point_cloud.hpp"

namespace pcreg {

/// 1 x feature_width global feature.
template <typename T>
using FeatureRow = Eigen::Matrix<T, 1, Eigen::Dynamic>;
using GlobalFeature = Eigen::VectorXd;

/// Shared per-point MLP followed by a coordinatewise max over points.
template <typename T>
FeatureRow<T> encode(const Model<T>& model, const ad::Tensor<T>& cloud);

template <typename T>
GlobalFeature encode(const Model<T>& model, const PointCloud& cloud) {
  return encode(model, ad::Tensor<T>(cloud.points().template cast<T>())).transpose().template cast<double>();
}

/// Taped version; `cloud` is an N x 3 variable (constant or differentiable).
template <typename T>
ad::Var encode(ad::Tape<T>& tape, Model<T>& model, ad::Var cloud);

/// Stacked clouds; cloud s occupies rows offsets[s] .. offsets[s+1]-1.
/// Returns one feature row per cloud.
template <typename T>
ad::Var encode_batch(ad::Tape<T>& tape, Model<T>& model, ad::Var clouds, const std::vector<Eigen::Index>& offsets);

/// Both clouds through the same weights.
template <typename T>
std::pair<GlobalFeature, GlobalFeature> encode_siamese(const Model<T>& model, const PointCloud& source,
                                                       const PointCloud& templ) {
  return {encode(model, source), encode(model, templ)};
}

template <typename T>
std::pair<ad::Var, ad::Var> encode_siamese(ad::Tape<T>& tape, Model<T>& model, ad::Var source, ad::Var templ) {
  return {encode(tape, model, source), encode(tape, model, templ)};
}

}  // namespace pcreg
