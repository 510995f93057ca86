#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pcreg/autodiff.hpp"
#include "pcreg/losses.hpp"
#include "pcreg/model.hpp"
#include "pcreg/point_cloud.hpp"
#include "pcreg/se3.hpp"

namespace pcreg {

enum class DatasetRegime { multi_category, single_category, single_model };

DatasetRegime parse_regime(const std::string& s);
const char* to_string(DatasetRegime r);

struct DatasetSpec {
  DatasetRegime regime = DatasetRegime::single_model;
  /// Already normalized template clouds (see prepare_templates).
  std::vector<PointCloud> templates;
  std::size_t points_per_cloud = 1024;
  /// Per-pair noise sigma is uniform in [0, noise_sigma_max].
  double noise_sigma_max = 0.0;
  /// Per-pair keep fraction is uniform in [partial_keep_min, 1]; 1 disables.
  double partial_keep_min = 1.0;
  std::optional<std::size_t> sparsify_to;
  double max_angle_deg = 45.0;
  double max_translation = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// `gt` is the transform applied to the template to make the source, so
/// registration should recover inverse(gt).
struct TrainingPair {
  PointCloud source;
  Transform gt;
  std::size_t template_index = 0;

  Transform target() const { return inverse(gt); }
};

/// Normalizes every cloud into the unit box (once) and resamples it to
/// `points` with farthest point sampling when it has more points.
std::vector<PointCloud> prepare_templates(const std::vector<PointCloud>& raw, std::size_t points,
                                          std::uint64_t seed);

/// Euler angles uniform in [-max_angle, max_angle] per axis, translation
/// uniform in [-max_t, max_t]; source = corrupt(gt * template).
TrainingPair generate_pair(const PointCloud& templ, const DatasetSpec& spec, std::mt19937_64& rng);

/// `count` pairs with templates drawn uniformly from spec.templates.
std::vector<TrainingPair> generate_pairs(const DatasetSpec& spec, std::size_t count, std::uint64_t seed);

// ---- optimizer ----------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  long step = 0;     // completed updates
  long skipped = 0;  // updates skipped because of non-finite gradients
};

/// learning_rate * decay_factor ^ floor(step / decay_every_steps).
double scheduled_learning_rate(double learning_rate, double decay_factor, long decay_every_steps, long step);

/// Bias-corrected Adam update with step size `lr`. Returns false (and leaves
/// the parameters untouched) when any gradient is non-finite.
template <typename T>
bool adam_step(ad::ParamStore<T>& params, AdamState& state, const AdamConfig& cfg, double lr);

// ---- training loop --------------------------------------------------------------

struct TrainConfig {
  LossKind loss = LossKind::chamfer;
  HeadVariant head = HeadVariant::ipcrnet;
  /// Unrolled alignment iterations per training pair (forced to 1 for pcrnet).
  int unroll_iterations = 8;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double decay_factor = 0.7;
  long decay_every_steps = 3000000;
  int epochs = 10;
  std::size_t pairs_per_epoch = 1024;
  /// Fresh pairs every epoch (true) or one fixed training set (false).
  bool resample_each_epoch = true;
  AdamConfig adam;
  std::uint64_t seed = 1;
  /// Write a checkpoint every this many epochs (0: only the final one).
  int checkpoint_every = 0;
  std::size_t emd_cap = kDefaultEmdCap;
  ModelConfig model;

  void validate() const;
};

struct EpochStat {
  int epoch = 0;
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::size_t failed_pairs = 0;  // non-finite loss or degenerate pose
};

struct TrainReport {
  std::vector<EpochStat> epochs;
  long steps = 0;
  long skipped_steps = 0;
  double wall_time_s = 0.0;
};

struct TrainOutputs {
  /// Directory for losses.csv and checkpoints; empty disables file output.
  std::string directory;
  std::function<void(const EpochStat&)> on_epoch;
};

/// Mean loss of one batch and the accumulated gradient (scaled by 1/B) in
/// model.params. Exposed for tests.
template <typename T>
double batch_loss_and_grad(Model<T>& model, const DatasetSpec& spec, const std::vector<TrainingPair>& batch,
                           const TrainConfig& cfg, std::uint64_t dropout_seed, bool train, std::size_t* failed = nullptr);

/// Trains from a fresh model initialized with cfg.seed. Fully deterministic
/// given (spec, cfg).
TrainReport train(const DatasetSpec& spec, const TrainConfig& cfg, Model<float>& model,
                  const TrainOutputs& outputs = {});

/// Loss values for the given model on a held-out set (dropout off).
template <typename T>
double evaluate_loss(Model<T>& model, const DatasetSpec& spec, const std::vector<TrainingPair>& pairs,
                     const TrainConfig& cfg);

}  // namespace pcreg
