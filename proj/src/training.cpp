#include "pcreg/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <stdexcept>

#include "pcreg/checkpoint.hpp"
#include "pcreg/cloud_ops.hpp"
#include "pcreg/encoder.hpp"
#include "pcreg/errors.hpp"
#include "pcreg/fc_head.hpp"

namespace pcreg {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0, std::uint64_t d = 0) {
  return splitmix(splitmix(splitmix(splitmix(a) ^ b) ^ c) ^ d);
}

}  // namespace

DatasetRegime parse_regime(const std::string& s) {
  if (s == "multi_category") return DatasetRegime::multi_category;
  if (s == "single_category") return DatasetRegime::single_category;
  if (s == "single_model") return DatasetRegime::single_model;
  throw std::invalid_argument("unknown regime '" + s + "' (expected multi_category, single_category or single_model)");
}

const char* to_string(DatasetRegime r) {
  switch (r) {
    case DatasetRegime::multi_category: return "multi_category";
    case DatasetRegime::single_category: return "single_category";
    case DatasetRegime::single_model: return "single_model";
  }
  return "?";
}

void DatasetSpec::validate() const {
  if (templates.empty()) throw std::invalid_argument("dataset: no templates");
  if (regime == DatasetRegime::single_model && templates.size() != 1) {
    throw std::invalid_argument("dataset: single_model regime needs exactly one template, got " +
                                std::to_string(templates.size()));
  }
  if (!(noise_sigma_max >= 0.0)) throw std::invalid_argument("dataset: noise_sigma_max must be >= 0");
  if (!(partial_keep_min > 0.0 && partial_keep_min <= 1.0)) {
    throw std::invalid_argument("dataset: partial_keep_min must be in (0, 1]");
  }
  if (points_per_cloud == 0) throw std::invalid_argument("dataset: points_per_cloud must be >= 1");
  if (sparsify_to && *sparsify_to == 0) throw std::invalid_argument("dataset: sparsify_to must be >= 1");
  if (!(max_angle_deg >= 0.0) || !(max_translation >= 0.0)) {
    throw std::invalid_argument("dataset: transform ranges must be non-negative");
  }
}

std::vector<PointCloud> prepare_templates(const std::vector<PointCloud>& raw, std::size_t points,
                                          std::uint64_t seed) {
  std::vector<PointCloud> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const PointCloud& c = raw[i];
    if (c.size() > points) {
      out.push_back(normalize_unit_box(farthest_point_sample(c, points, derive_seed(seed, 0x7e, i))));
    } else {
      out.push_back(normalize_unit_box(c));
    }
  }
  return out;
}

TrainingPair generate_pair(const PointCloud& templ, const DatasetSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-spec.max_angle_deg, spec.max_angle_deg);
  std::uniform_real_distribution<double> trans(-spec.max_translation, spec.max_translation);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vec3 a, t;
  for (int i = 0; i < 3; ++i) a[i] = angle(rng);
  for (int i = 0; i < 3; ++i) t[i] = trans(rng);
  const double sigma = spec.noise_sigma_max * unit(rng);
  const double keep = spec.partial_keep_min + (1.0 - spec.partial_keep_min) * unit(rng);
  const std::uint64_t noise_seed = rng();
  const std::uint64_t partial_seed = rng();
  const std::uint64_t sparse_seed = rng();

  const Transform gt = euler_to_transform(a, t);
  PointCloud src = apply(gt, templ);
  if (keep < 1.0) src = make_partial(src, keep, partial_seed);
  if (spec.sparsify_to && *spec.sparsify_to < src.size()) src = sparsify(src, *spec.sparsify_to, sparse_seed);
  src = add_gaussian_noise(src, sigma, noise_seed);
  return {std::move(src), gt, 0};
}

std::vector<TrainingPair> generate_pairs(const DatasetSpec& spec, std::size_t count, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, spec.templates.size() - 1);
  std::vector<TrainingPair> pairs;
  pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t ti = spec.templates.size() == 1 ? 0 : pick(rng);
    TrainingPair p = generate_pair(spec.templates[ti], spec, rng);
    p.template_index = ti;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

double scheduled_learning_rate(double learning_rate, double decay_factor, long decay_every_steps, long step) {
  if (decay_every_steps <= 0) return learning_rate;
  return learning_rate * std::pow(decay_factor, static_cast<double>(step / decay_every_steps));
}

template <typename T>
bool adam_step(ad::ParamStore<T>& params, AdamState& state, const AdamConfig& cfg, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].grad.allFinite()) {
      ++state.skipped;
      return false;
    }
  }
  const long t = state.step + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step_size = static_cast<T>(lr / bc1);
  const T sqrt_bc2 = static_cast<T>(std::sqrt(bc2));
  const T eps = static_cast<T>(cfg.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.adam_m.size() != p.value.size()) {
      p.adam_m = ad::Tensor<T>::Zero(p.value.rows(), p.value.cols());
      p.adam_v = ad::Tensor<T>::Zero(p.value.rows(), p.value.cols());
    }
    p.adam_m = b1 * p.adam_m + (T(1) - b1) * p.grad;
    p.adam_v = b2 * p.adam_v + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= step_size * p.adam_m.array() / (p.adam_v.array().sqrt() / sqrt_bc2 + eps);
  }
  state.step = t;
  return true;
}

void TrainConfig::validate() const {
  if (unroll_iterations < 1) throw std::invalid_argument("train: unroll_iterations must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (pairs_per_epoch < 1) throw std::invalid_argument("train: pairs_per_epoch must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (!(decay_factor > 0.0)) throw std::invalid_argument("train: decay_factor must be > 0");
  if (checkpoint_every < 0) throw std::invalid_argument("train: checkpoint_every must be >= 0");
}

namespace {

template <typename T>
int effective_unroll(const TrainConfig& cfg, const Model<T>& m) {
  return m.config.head == HeadVariant::pcrnet ? 1 : cfg.unroll_iterations;
}

}  // namespace

template <typename T>
double batch_loss_and_grad(Model<T>& model, const DatasetSpec& spec, const std::vector<TrainingPair>& batch,
                           const TrainConfig& cfg, std::uint64_t dropout_seed, bool train, std::size_t* failed) {
  using M = ad::Tensor<T>;
  using Index = Eigen::Index;
  if (batch.empty()) throw std::invalid_argument("train: empty batch");
  if (train) model.params.zero_grad();
  const int unroll = effective_unroll(cfg, model);
  const auto nb = batch.size();

  // The whole batch lives on one tape: clouds are stacked row-wise and the
  // encoder pools per segment, so the FC head runs as one B-row product.
  ad::Tape<T> tape;

  std::vector<std::size_t> tmpl_ids;  // distinct templates, first-seen order
  std::vector<std::size_t> tmpl_slot(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto it = std::find(tmpl_ids.begin(), tmpl_ids.end(), batch[b].template_index);
    tmpl_slot[b] = static_cast<std::size_t>(it - tmpl_ids.begin());
    if (it == tmpl_ids.end()) tmpl_ids.push_back(batch[b].template_index);
  }
  std::vector<Index> tmpl_offsets{0};
  for (std::size_t id : tmpl_ids) tmpl_offsets.push_back(tmpl_offsets.back() + static_cast<Index>(spec.templates.at(id).size()));
  M tmpl_stack(tmpl_offsets.back(), 3);
  std::vector<ad::Var> tmpl_clouds;
  for (std::size_t j = 0; j < tmpl_ids.size(); ++j) {
    const auto& pts = spec.templates[tmpl_ids[j]].points();
    tmpl_stack.middleRows(tmpl_offsets[j], pts.rows()) = pts.template cast<T>();
    tmpl_clouds.push_back(tape.constant(M(pts.template cast<T>())));
  }
  const ad::Var tmpl_var = tape.constant(std::move(tmpl_stack));
  const ad::Var tmpl_features = encode_batch(tape, model, tmpl_var, tmpl_offsets);
  std::vector<ad::Var> tmpl_rows;
  for (std::size_t j = 0; j < tmpl_ids.size(); ++j) tmpl_rows.push_back(ad::slice_rows(tape, tmpl_features, static_cast<Index>(j), 1));
  std::vector<ad::Var> ft_parts(nb);
  for (std::size_t b = 0; b < nb; ++b) ft_parts[b] = tmpl_rows[tmpl_slot[b]];
  const ad::Var ft = tmpl_ids.size() == 1 && nb == 1 ? tmpl_rows[0] : ad::stack_rows(tape, ft_parts);

  std::vector<Index> offsets{0};
  for (const auto& p : batch) offsets.push_back(offsets.back() + static_cast<Index>(p.source.size()));
  M src_stack(offsets.back(), 3);
  for (std::size_t b = 0; b < nb; ++b) {
    src_stack.middleRows(offsets[b], offsets[b + 1] - offsets[b]) = batch[b].source.points().template cast<T>();
  }
  ad::Var src = tape.constant(std::move(src_stack));

  std::vector<ad::Var> item_clouds(nb), cumulative(nb);
  std::vector<double> values(nb, std::numeric_limits<double>::quiet_NaN());
  std::vector<ad::Var> losses(nb);
  try {
    for (int k = 0; k < unroll; ++k) {
      const ad::Var fs = encode_batch(tape, model, src, offsets);
      const ad::Var pose = fc_head_forward(tape, model, fs, ft, train, derive_seed(dropout_seed, static_cast<std::uint64_t>(k)));
      const bool last = k + 1 == unroll;
      for (std::size_t b = 0; b < nb; ++b) {
        const ad::Var pb = ad::slice_rows(tape, pose, static_cast<Index>(b), 1);
        if (cfg.loss == LossKind::frobenius) {
          const ad::Var m = ad::pose_matrix(tape, pb);
          cumulative[b] = cumulative[b].valid() ? ad::matmul(tape, m, cumulative[b]) : m;
          if (last) continue;
        }
        const ad::Var cb = ad::slice_rows(tape, src, offsets[b], offsets[b + 1] - offsets[b]);
        item_clouds[b] = ad::transform_points(tape, pb, cb);
      }
      if (!last) src = ad::stack_rows(tape, item_clouds);
    }
    for (std::size_t b = 0; b < nb; ++b) {
      const ad::Var templ = tmpl_clouds[tmpl_slot[b]];
      switch (cfg.loss) {
        case LossKind::chamfer: losses[b] = ad::chamfer(tape, item_clouds[b], templ); break;
        case LossKind::emd: losses[b] = ad::emd(tape, item_clouds[b], templ, cfg.emd_cap); break;
        case LossKind::frobenius: losses[b] = ad::frobenius_loss(tape, cumulative[b], batch[b].target()); break;
      }
      values[b] = static_cast<double>(tape.value(losses[b])(0, 0));
    }
  } catch (const DegeneratePose&) {
    if (failed) *failed = nb;
    return std::numeric_limits<double>::quiet_NaN();
  }

  double total = 0.0;
  std::size_t bad = 0;
  ad::Var objective;
  const double weight = 1.0 / static_cast<double>(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    if (!std::isfinite(values[b])) {
      ++bad;
      continue;
    }
    total += values[b];
    const ad::Var term = ad::scale(tape, losses[b], weight);
    objective = objective.valid() ? ad::add(tape, objective, term) : term;
  }
  if (train && objective.valid()) tape.backward(objective);
  if (failed) *failed = bad;
  return bad == nb ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(nb - bad);
}

template <typename T>
double evaluate_loss(Model<T>& model, const DatasetSpec& spec, const std::vector<TrainingPair>& pairs,
                     const TrainConfig& cfg) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(pairs.size(), start + cfg.batch_size);
    const std::vector<TrainingPair> batch(pairs.begin() + static_cast<long>(start),
                                          pairs.begin() + static_cast<long>(end));
    std::size_t failed = 0;
    const double l = batch_loss_and_grad(model, spec, batch, cfg, 0, false, &failed);
    if (std::isfinite(l)) {
      sum += l * static_cast<double>(batch.size() - failed);
      n += batch.size() - failed;
    }
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

TrainReport train(const DatasetSpec& spec, const TrainConfig& cfg, Model<float>& model, const TrainOutputs& outputs) {
  spec.validate();
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig mc = cfg.model;
  mc.head = cfg.head;
  model = make_model<float>(mc, cfg.seed);

  std::ofstream csv;
  std::filesystem::path dir;
  if (!outputs.directory.empty()) {
    dir = outputs.directory;
    std::filesystem::create_directories(dir);
    csv.open(dir / "losses.csv");
    if (!csv) throw std::runtime_error("cannot write " + (dir / "losses.csv").string());
    csv << "epoch,step,loss,lr\n" << std::setprecision(10);
  }

  TrainReport report;
  AdamState state;
  std::vector<TrainingPair> data;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (data.empty() || cfg.resample_each_epoch) {
      data = generate_pairs(spec, cfg.pairs_per_epoch,
                            derive_seed(spec.seed, cfg.resample_each_epoch ? static_cast<std::uint64_t>(epoch) : 0));
    }
    EpochStat stat;
    stat.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    double lr = cfg.learning_rate;
    for (std::size_t start = 0; start < data.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(data.size(), start + cfg.batch_size);
      const std::vector<TrainingPair> batch(data.begin() + static_cast<long>(start),
                                            data.begin() + static_cast<long>(end));
      std::size_t failed = 0;
      const double l = batch_loss_and_grad(model, spec, batch, cfg, derive_seed(cfg.seed, 0xd0, state.step + state.skipped),
                                           true, &failed);
      stat.failed_pairs += failed;
      if (std::isfinite(l)) {
        loss_sum += l * static_cast<double>(batch.size() - failed);
        loss_n += batch.size() - failed;
      }
      lr = scheduled_learning_rate(cfg.learning_rate, cfg.decay_factor, cfg.decay_every_steps, state.step);
      adam_step(model.params, state, cfg.adam, lr);
    }
    stat.step = state.step;
    stat.lr = lr;
    stat.loss = loss_n ? loss_sum / static_cast<double>(loss_n) : std::numeric_limits<double>::quiet_NaN();
    report.epochs.push_back(stat);
    if (csv.is_open()) csv << stat.epoch << ',' << stat.step << ',' << stat.loss << ',' << stat.lr << '\n' << std::flush;
    if (!dir.empty() && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && epoch != cfg.epochs) {
      save_checkpoint((dir / ("checkpoint_epoch" + std::to_string(epoch) + ".ckpt")).string(), model);
    }
    if (outputs.on_epoch) outputs.on_epoch(stat);
  }
  if (!dir.empty()) save_checkpoint((dir / "model.ckpt").string(), model);
  report.steps = state.step;
  report.skipped_steps = state.skipped;
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

template bool adam_step<float>(ad::ParamStore<float>&, AdamState&, const AdamConfig&, double);
template bool adam_step<double>(ad::ParamStore<double>&, AdamState&, const AdamConfig&, double);
template double batch_loss_and_grad<float>(Model<float>&, const DatasetSpec&, const std::vector<TrainingPair>&,
                                           const TrainConfig&, std::uint64_t, bool, std::size_t*);
template double batch_loss_and_grad<double>(Model<double>&, const DatasetSpec&, const std::vector<TrainingPair>&,
                                            const TrainConfig&, std::uint64_t, bool, std::size_t*);
template double evaluate_loss<float>(Model<float>&, const DatasetSpec&, const std::vector<TrainingPair>&,
                                     const TrainConfig&);
template double evaluate_loss<double>(Model<double>&, const DatasetSpec&, const std::vector<TrainingPair>&,
                                      const TrainConfig&);

}  // namespace pcreg
