#pragma once

// Checkpoint container, version 1:
//
//   PCREG-CHECKPOINT 1\n
//   meta <key> <value>\n            (encoder_widths, relu_before_pool, head, dropout_rate)
//   tensor <name> <f32|f64> <rows> <cols>\n   (one line per tensor, in store order)
//   data\n
//   <raw little-endian buffers, row-major, concatenated in directory order>

#include <string>
#include <string_view>

#include "pcreg/model.hpp"

namespace pcreg {

enum class DType { f32, f64 };

template <typename T>
std::string serialize_checkpoint(const Model<T>& model);
/// Values are converted to T if the stored dtype differs.
template <typename T>
Model<T> parse_checkpoint(std::string_view bytes);

template <typename T>
void save_checkpoint(const std::string& path, const Model<T>& model);
template <typename T>
Model<T> load_checkpoint(const std::string& path);

}  // namespace pcreg
