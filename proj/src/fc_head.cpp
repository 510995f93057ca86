#include "pcreg/fc_head.hpp"

#include <string>

#include "pcreg/errors.hpp"

namespace pcreg {

template <typename T>
ad::Var fc_head_forward(ad::Tape<T>& tape, Model<T>& model, ad::Var source_feature, ad::Var template_feature,
                        bool train, std::uint64_t dropout_seed) {
  ad::Var h = ad::concat(tape, source_feature, template_feature);
  const auto hidden = model.config.head_hidden_widths();
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::string base = "head.fc" + std::to_string(l);
    h = ad::linear(tape, h, tape.parameter(model.params.at(base + ".weight")),
                   tape.parameter(model.params.at(base + ".bias")));
    h = ad::relu(tape, h);
  }
  if (model.config.head == HeadVariant::ipcrnet) {
    h = ad::dropout(tape, h, model.config.dropout_rate, dropout_seed, train);
  }
  return ad::linear(tape, h, tape.parameter(model.params.at("head.out.weight")),
                    tape.parameter(model.params.at("head.out.bias")));
}

template <typename T>
PoseVector fc_head_forward(const Model<T>& model, const FeatureRow<T>& source_feature,
                           const FeatureRow<T>& template_feature) {
  if (source_feature.size() != model.config.feature_width() ||
      template_feature.size() != model.config.feature_width()) {
    throw ShapeError("fc_head_forward: feature width does not match the model");
  }
  if (!source_feature.allFinite() || !template_feature.allFinite()) {
    throw std::invalid_argument("fc_head_forward: non-finite feature");
  }
  Eigen::Matrix<T, 1, Eigen::Dynamic> h(source_feature.size() + template_feature.size());
  h << source_feature, template_feature;
  const auto hidden = model.config.head_hidden_widths();
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const std::string base = "head.fc" + std::to_string(l);
    const auto& w = model.params.at(base + ".weight").value;
    const auto& b = model.params.at(base + ".bias").value;
    Eigen::Matrix<T, 1, Eigen::Dynamic> next = h * w.transpose() + b.row(0);
    h = next.cwiseMax(T(0));
  }
  const Eigen::Matrix<T, 1, Eigen::Dynamic> out =
      h * model.params.at("head.out.weight").value.transpose() + model.params.at("head.out.bias").value.row(0);
  Eigen::Matrix<double, 7, 1> v = out.transpose().template cast<double>();
  return PoseVector::quaternion7(v);
}

template ad::Var fc_head_forward<float>(ad::Tape<float>&, Model<float>&, ad::Var, ad::Var, bool, std::uint64_t);
template ad::Var fc_head_forward<double>(ad::Tape<double>&, Model<double>&, ad::Var, ad::Var, bool, std::uint64_t);
template PoseVector fc_head_forward<float>(const Model<float>&, const FeatureRow<float>&, const FeatureRow<float>&);
template PoseVector fc_head_forward<double>(const Model<double>&, const FeatureRow<double>&,
                                            const FeatureRow<double>&);

}  // namespace pcreg
