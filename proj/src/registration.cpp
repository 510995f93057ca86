#include "pcreg/registration.hpp"

#include <chrono>
#include <cmath>

#include "pcreg/errors.hpp"

namespace pcreg {

HeadKind parse_head_kind(const std::string& s) {
  if (s == "fc_pcrnet" || s == "pcrnet") return HeadKind::fc_pcrnet;
  if (s == "fc_ipcrnet" || s == "ipcrnet") return HeadKind::fc_ipcrnet;
  if (s == "lk") return HeadKind::lk;
  throw std::invalid_argument("unknown head '" + s + "' (expected fc_pcrnet, fc_ipcrnet or lk)");
}

const char* to_string(HeadKind k) {
  switch (k) {
    case HeadKind::fc_pcrnet: return "fc_pcrnet";
    case HeadKind::fc_ipcrnet: return "fc_ipcrnet";
    case HeadKind::lk: return "lk";
  }
  return "?";
}

void RegistrationConfig::validate() const {
  if (max_iterations < 1) throw std::invalid_argument("registration: max_iterations must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("registration: epsilon must be > 0");
}

template <typename T>
void FcAligner<T>::set_template(const PointCloud& templ) {
  template_feature_ = encode(model_, ad::Tensor<T>(templ.points().template cast<T>()));
}

template <typename T>
AlignmentStep FcAligner<T>::step(const PointCloud& source) {
  const FeatureRow<T> fs = encode(model_, ad::Tensor<T>(source.points().template cast<T>()));
  const PoseVector pose = fc_head_forward(model_, fs, template_feature_);
  AlignmentStep s;
  s.increment = pose_to_transform(pose);
  s.residual = static_cast<double>((fs - template_feature_).norm());
  return s;
}

template class FcAligner<float>;
template class FcAligner<double>;

void LkAligner::set_template(const PointCloud& templ) { state_ = lk_precompute(templ, phi_, fd_step_); }

AlignmentStep LkAligner::step(const PointCloud& source) {
  const GlobalFeature fs = phi_(source);
  AlignmentStep s;
  s.increment = lk_step(state_, fs);
  s.residual = (fs - state_.template_feature).norm();
  return s;
}

Transform register_single_pass(const PointCloud& source, const PointCloud& templ, Aligner& aligner) {
  aligner.set_template(templ);
  try {
    return aligner.step(source).increment;
  } catch (const DegeneratePose& e) {
    throw DegeneratePose(std::string("single-pass registration: head produced an unusable pose: ") + e.what());
  }
}

RegistrationResult register_iterative(const PointCloud& source, const PointCloud& templ, Aligner& aligner,
                                      const RegistrationConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RegistrationResult result;
  auto finish = [&] {
    result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  aligner.set_template(templ);
  PointCloud current = source;
  Transform cumulative;
  Transform previous;
  for (int i = 1; i <= cfg.max_iterations; ++i) {
    AlignmentStep step;
    try {
      step = aligner.step(current);
    } catch (const std::exception& e) {
      finish();
      throw RegistrationAborted("iteration " + std::to_string(i) + ": " + e.what(), result);
    }
    if (!step.increment.translation().allFinite() || !step.increment.rotation().quaternion().coeffs().allFinite()) {
      finish();
      throw RegistrationAborted("iteration " + std::to_string(i) + ": non-finite increment", result);
    }
    cumulative = compose(step.increment, cumulative);
    current = apply(step.increment, current);
    result.transform = cumulative;
    result.iterations_used = i;
    if (cfg.record_trace) result.trace.push_back({step.increment, cumulative, step.residual});
    if (i >= 2 && frobenius_deviation(cumulative, previous) < cfg.epsilon) {
      result.converged = true;
      break;
    }
    previous = cumulative;
  }
  finish();
  return result;
}

}  // namespace pcreg
