#include "pcreg/encoder.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcreg/errors.hpp"

namespace pcreg {

template <typename T>
FeatureRow<T> encode(const Model<T>& model, const ad::Tensor<T>& cloud) {
  if (cloud.rows() < 1) throw std::invalid_argument("encode: empty point cloud");
  if (cloud.cols() != 3) throw ShapeError("encode: expected N x 3 cloud");
  const std::size_t layers = model.config.encoder_widths.size();
  std::vector<const ad::Tensor<T>*> ws, bs;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string base = "encoder.mlp" + std::to_string(l);
    ws.push_back(&model.params.at(base + ".weight").value);
    bs.push_back(&model.params.at(base + ".bias").value);
  }
  // Points go through the whole MLP in fixed 64-row blocks. A short last
  // block is padded with copies of point 0, which cannot change the max. With
  // every block the same size, GEMM rounding does not depend on where a point
  // sits in the cloud, so the feature is bit-identical under permutation.
  constexpr Eigen::Index kBlock = 64;
  FeatureRow<T> out = FeatureRow<T>::Constant(ws.back()->rows(), -std::numeric_limits<T>::infinity());
  ad::Tensor<T> h(kBlock, 3), next;
  for (Eigen::Index r = 0; r < cloud.rows(); r += kBlock) {
    const Eigen::Index n = std::min(kBlock, cloud.rows() - r);
    h.resize(kBlock, 3);
    h.topRows(n) = cloud.middleRows(r, n);
    for (Eigen::Index i = n; i < kBlock; ++i) h.row(i) = cloud.row(0);
    for (std::size_t l = 0; l < layers; ++l) {
      next.resize(kBlock, ws[l]->rows());
      next.noalias() = h * ws[l]->transpose();
      next.rowwise() += bs[l]->row(0);
      if (l + 1 < layers) {
        h = next.cwiseMax(T(0));
      } else {
        out = out.cwiseMax(next.colwise().maxCoeff());
      }
    }
  }
  if (model.config.relu_before_pool) out = out.cwiseMax(T(0));
  return out;
}

template <typename T>
ad::Var encode(ad::Tape<T>& tape, Model<T>& model, ad::Var cloud) {
  const Eigen::Index n = tape.value(cloud).rows();
  if (n < 1) throw std::invalid_argument("encode: empty point cloud");
  return encode_batch(tape, model, cloud, {0, n});
}

template <typename T>
ad::Var encode_batch(ad::Tape<T>& tape, Model<T>& model, ad::Var clouds, const std::vector<Eigen::Index>& offsets) {
  if (tape.value(clouds).cols() != 3) throw ShapeError("encode: expected N x 3 clouds");
  const std::size_t layers = model.config.encoder_widths.size();
  ad::Var h = clouds;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string base = "encoder.mlp" + std::to_string(l);
    const ad::Var w = tape.parameter(model.params.at(base + ".weight"));
    const ad::Var b = tape.parameter(model.params.at(base + ".bias"));
    if (l + 1 == layers) return ad::linear_max_pool(tape, h, w, b, offsets, model.config.relu_before_pool);
    h = ad::relu(tape, ad::linear(tape, h, w, b));
  }
  throw std::logic_error("encode: model has no layers");
}

template FeatureRow<float> encode<float>(const Model<float>&, const ad::Tensor<float>&);
template FeatureRow<double> encode<double>(const Model<double>&, const ad::Tensor<double>&);
template ad::Var encode<float>(ad::Tape<float>&, Model<float>&, ad::Var);
template ad::Var encode<double>(ad::Tape<double>&, Model<double>&, ad::Var);
template ad::Var encode_batch<float>(ad::Tape<float>&, Model<float>&, ad::Var, const std::vector<Eigen::Index>&);
template ad::Var encode_batch<double>(ad::Tape<double>&, Model<double>&, ad::Var, const std::vector<Eigen::Index>&);

}  // namespace pcreg
