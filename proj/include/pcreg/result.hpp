#pragma once

#include <vector>

#include "pcreg/se3.hpp"

namespace pcreg {

struct IterationRecord {
  Transform increment;
  Transform cumulative;
  /// Feature residual norm for learned aligners, correspondence MSE for ICP.
  double residual = 0.0;
};

struct RegistrationResult {
  /// Maps the original source onto the template.
  Transform transform;
  int iterations_used = 0;
  bool converged = false;
  std::vector<IterationRecord> trace;
  double wall_time_s = 0.0;
};

}  // namespace pcreg
