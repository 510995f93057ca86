#pragma once

#include <cstdint>

#include "pcreg/autodiff.hpp"
#include "pcreg/encoder.hpp"
#include "pcreg/model.hpp"
#include "pcreg/se3.hpp"

namespace pcreg {

/// Raw quaternion7 output of the fully connected head for (source, template)
/// features. Hidden layers use ReLU; the output layer is linear. Dropout is
/// applied only for the i-PCRNet variant when `train` is set.
template <typename T>
ad::Var fc_head_forward(ad::Tape<T>& tape, Model<T>& model, ad::Var source_feature, ad::Var template_feature,
                        bool train, std::uint64_t dropout_seed = 0);

/// Inference path (dropout off).
template <typename T>
PoseVector fc_head_forward(const Model<T>& model, const FeatureRow<T>& source_feature,
                           const FeatureRow<T>& template_feature);

}  // namespace pcreg
