#include "pcreg/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace pcreg {

HeadVariant parse_head_variant(const std::string& s) {
  if (s == "pcrnet" || s == "fc_pcrnet") return HeadVariant::pcrnet;
  if (s == "ipcrnet" || s == "fc_ipcrnet") return HeadVariant::ipcrnet;
  throw std::invalid_argument("unknown head variant '" + s + "' (expected pcrnet or ipcrnet)");
}

const char* to_string(HeadVariant v) { return v == HeadVariant::pcrnet ? "pcrnet" : "ipcrnet"; }

std::vector<int> ModelConfig::head_hidden_widths() const {
  if (head == HeadVariant::pcrnet) return {1024, 1024, 512, 512, 256};
  return {1024, 512, 256};
}

namespace {

template <typename T>
ad::Tensor<T> glorot(int fan_out, int fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  ad::Tensor<T> w(fan_out, fan_in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(u(rng));
  return w;
}

}  // namespace

template <typename T>
Model<T> make_model(const ModelConfig& config, std::uint64_t seed) {
  for (int w : config.encoder_widths) {
    if (w < 1) throw std::invalid_argument("encoder widths must be positive");
  }
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  Model<T> m;
  m.config = config;
  std::mt19937_64 rng(seed);
  int in = 3;
  for (std::size_t l = 0; l < config.encoder_widths.size(); ++l) {
    const int out = config.encoder_widths[l];
    const std::string base = "encoder.mlp" + std::to_string(l);
    m.params.add(base + ".weight", glorot<T>(out, in, rng));
    m.params.add(base + ".bias", ad::Tensor<T>::Zero(1, out));
    in = out;
  }
  in = 2 * config.feature_width();
  const auto hidden = config.head_hidden_widths();
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::string base = "head.fc" + std::to_string(l);
    m.params.add(base + ".weight", glorot<T>(hidden[l], in, rng));
    m.params.add(base + ".bias", ad::Tensor<T>::Zero(1, hidden[l]));
    in = hidden[l];
  }
  m.params.add("head.out.weight", ad::Tensor<T>::Zero(ModelConfig::kPoseWidth, in));
  ad::Tensor<T> bias = ad::Tensor<T>::Zero(1, ModelConfig::kPoseWidth);
  bias(0, 0) = T(1);
  m.params.add("head.out.bias", std::move(bias));
  return m;
}

template Model<float> make_model<float>(const ModelConfig&, std::uint64_t);
template Model<double> make_model<double>(const ModelConfig&, std::uint64_t);

}  // namespace pcreg
