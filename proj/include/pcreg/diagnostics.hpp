#pragma once

#include <cstdint>
#include <string>

#include "pcreg/autodiff.hpp"

namespace pcreg {

enum class GradCheckScope { linear, encoder, full };

GradCheckScope parse_grad_check_scope(const std::string& s);

/// Finite-difference check of a representative 64-bit pipeline:
///   linear   one linear layer, loss = sum of outputs
///   encoder  PointNet encoder, loss = <feature, fixed random vector>
///   full     encoder -> PCRNet head -> pose -> transform -> Chamfer
/// Clouds have `points` points; the head output layer is re-drawn at random
/// so that every parameter receives a gradient.
ad::GradCheckReport run_grad_check(GradCheckScope scope, double tolerance, std::uint64_t seed, int points = 16);

std::string format_grad_check(const ad::GradCheckReport& report);

}  // namespace pcreg
