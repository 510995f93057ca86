#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcreg/autodiff.hpp"

namespace pcreg {

enum class HeadVariant { pcrnet, ipcrnet };

HeadVariant parse_head_variant(const std::string& s);
const char* to_string(HeadVariant v);

struct ModelConfig {
  /// Per-point MLP output widths; the last one is the global feature width.
  std::array<int, 5> encoder_widths{64, 64, 64, 128, 1024};
  /// ReLU after the last per-point layer, before max pooling.
  bool relu_before_pool = true;
  HeadVariant head = HeadVariant::ipcrnet;
  /// Drop probability of the layer in front of the i-PCRNet output layer.
  double dropout_rate = 0.3;

  int feature_width() const { return encoder_widths.back(); }
  std::vector<int> head_hidden_widths() const;
  static constexpr int kPoseWidth = 7;
};

/// Encoder and head weights for one network. Parameter names:
///   encoder.mlp{0..4}.{weight,bias}
///   head.fc{0..}.{weight,bias}, head.out.{weight,bias}
template <typename T>
struct Model {
  ModelConfig config;
  ad::ParamStore<T> params;

  template <typename U>
  Model<U> cast() const {
    return Model<U>{config, params.template cast<U>()};
  }
};

/// Glorot-uniform weights, zero biases. The output layer starts at zero
/// weights with bias (1, 0, 0, 0, 0, 0, 0), i.e. the identity pose.
template <typename T>
Model<T> make_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace pcreg
