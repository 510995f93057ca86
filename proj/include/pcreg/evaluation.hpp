#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pcreg/icp.hpp"
#include "pcreg/model.hpp"
#include "pcreg/point_cloud.hpp"
#include "pcreg/registration.hpp"
#include "pcreg/result.hpp"
#include "pcreg/se3.hpp"

namespace pcreg {

struct EvalRecord {
  std::string method;
  std::size_t pair_id = 0;
  double rotation_error = 0.0;     // degrees, in [0, 180]
  double translation_error = 0.0;  // scene units
  int iterations = 0;
  double wall_time_s = 0.0;
  bool failed = false;
};

struct SuccessCurve {
  std::vector<double> thresholds;  // ascending, degrees
  std::vector<double> ratios;
};

/// 0, 0.5, ..., 180.
std::vector<double> default_thresholds();

/// ratio(tau) = fraction of records with rotation_error <= tau.
SuccessCurve success_curve(const std::vector<EvalRecord>& records,
                           const std::vector<double>& thresholds = default_thresholds());
SuccessCurve success_curve(const std::vector<double>& rotation_errors,
                           const std::vector<double>& thresholds = default_thresholds());

/// Trapezoidal area under the curve divided by 180. The thresholds must start
/// at 0 and end at 180.
double auc(const SuccessCurve& curve);

/// Translation error charged to a failed registration: the diameter of the
/// [-1, 1]^3 translation range.
inline constexpr double kFailureTranslationError = 3.4641016151377544;  // 2 * sqrt(3)
inline constexpr double kFailureRotationError = 180.0;

struct BenchmarkPair {
  std::size_t pair_id = 0;
  PointCloud source;
  PointCloud templ;
  /// The transform that maps source onto templ.
  Transform target;
};

/// A registration method; must be callable concurrently for different pairs.
struct Method {
  std::string name;
  std::function<RegistrationResult(const PointCloud& source, const PointCloud& templ)> run;
};

Method icp_method(const IcpConfig& cfg = {}, std::string name = "icp");
/// Single-pass (max_iterations == 1) or iterative FC-head registration.
/// `model` must outlive the Method.
template <typename T>
Method fc_method(const Model<T>& model, const RegistrationConfig& cfg, std::string name);
/// PointNetLK with the model's encoder as the feature function.
template <typename T>
Method lk_method(const Model<T>& model, const RegistrationConfig& cfg, std::string name = "lk");

/// By name: "icp", "pcrnet" (single pass), "ipcrnet" (iterative) or "lk".
/// Learned methods need `model`, which must outlive the Method.
template <typename T>
Method make_method(const std::string& name, const Model<T>* model, const RegistrationConfig& reg = {},
                   const IcpConfig& icp_cfg = {});

/// Runs every method on every pair (same pairs for all methods). A method that
/// throws is charged the failure errors and flagged. Records are ordered by
/// method, then pair. Uses up to worker_threads() threads per method.
std::vector<EvalRecord> benchmark(const std::vector<Method>& methods, const std::vector<BenchmarkPair>& pairs);

struct MethodSummary {
  std::string method;
  std::size_t pairs = 0;
  double rot_mean = 0.0, rot_std = 0.0;
  double trans_mean = 0.0, trans_std = 0.0;  // scene units
  double time_mean_ms = 0.0, time_std_ms = 0.0;
  double median_iterations = 0.0;
  double auc = 0.0;
  std::size_t failures = 0;
};

/// Population statistics over the records of each method, in first-seen order.
std::vector<MethodSummary> summarize(const std::vector<EvalRecord>& records);

/// `method,pair_id,rot_err_deg,trans_err,iters,time_ms`.
void write_records_csv(std::ostream& os, const std::vector<EvalRecord>& records);
/// One row per method; translation columns are scaled by 100 (units of 1e-2).
void write_summary_csv(std::ostream& os, const std::vector<MethodSummary>& rows);
/// Aligned plain-text table with the same columns.
std::string format_summary_table(const std::vector<MethodSummary>& rows);

/// Worker count: PCREG_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
unsigned worker_threads();

}  // namespace pcreg
