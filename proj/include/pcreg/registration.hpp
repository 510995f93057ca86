#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "pcreg/encoder.hpp"
#include "pcreg/fc_head.hpp"
#include "pcreg/lk_head.hpp"
#include "pcreg/model.hpp"
#include "pcreg/point_cloud.hpp"
#include "pcreg/result.hpp"
#include "pcreg/se3.hpp"

namespace pcreg {

enum class HeadKind { fc_pcrnet, fc_ipcrnet, lk };

HeadKind parse_head_kind(const std::string& s);
const char* to_string(HeadKind k);

struct RegistrationConfig {
  HeadKind head = HeadKind::fc_ipcrnet;
  int max_iterations = 20;
  double epsilon = 1e-7;
  bool record_trace = true;

  void validate() const;
};

struct AlignmentStep {
  Transform increment;
  double residual = 0.0;
};

/// One single-pass alignment module: caches whatever depends only on the
/// template, then maps a source cloud to a pose increment.
class Aligner {
 public:
  virtual ~Aligner() = default;
  virtual void set_template(const PointCloud& templ) = 0;
  virtual AlignmentStep step(const PointCloud& source) = 0;
};

/// PointNet features + fully connected head.
template <typename T>
class FcAligner final : public Aligner {
 public:
  explicit FcAligner(const Model<T>& model) : model_(model) {}
  void set_template(const PointCloud& templ) override;
  AlignmentStep step(const PointCloud& source) override;

 private:
  const Model<T>& model_;
  FeatureRow<T> template_feature_;
};

/// Any feature function + inverse-compositional LK.
class LkAligner final : public Aligner {
 public:
  explicit LkAligner(FeatureFunction phi, double fd_step = kLkDefaultStep)
      : phi_(std::move(phi)), fd_step_(fd_step) {}
  void set_template(const PointCloud& templ) override;
  AlignmentStep step(const PointCloud& source) override;
  const LkState& state() const { return state_; }

 private:
  FeatureFunction phi_;
  double fd_step_;
  LkState state_;
};

/// Thrown when an increment is unusable; carries the trace so far.
class RegistrationAborted : public std::runtime_error {
 public:
  RegistrationAborted(const std::string& what, RegistrationResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const RegistrationResult& partial() const { return partial_; }

 private:
  RegistrationResult partial_;
};

/// One template pass and one source pass through the aligner.
Transform register_single_pass(const PointCloud& source, const PointCloud& templ, Aligner& aligner);

/// Repeats the aligner on the progressively transformed source. Stops when
/// || T_i T_{i-1}^-1 - I ||_F < epsilon for consecutive cumulative
/// transforms (checked from the second iteration on) or at max_iterations.
RegistrationResult register_iterative(const PointCloud& source, const PointCloud& templ, Aligner& aligner,
                                      const RegistrationConfig& cfg);

}  // namespace pcreg
