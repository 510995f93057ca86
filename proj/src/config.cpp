#include "pcreg/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <stdexcept>

#include "pcreg/cloud_ops.hpp"
#include "pcreg/errors.hpp"
#include "pcreg/io.hpp"

namespace pcreg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      // dataset
      "regime", "shape", "templates", "points_per_cloud", "noise_sigma_max", "partial_keep_min", "sparsify_to",
      "max_angle_deg", "max_translation", "data_seed",
      // training
      "loss", "head", "unroll_iterations", "batch_size", "learning_rate", "decay_factor", "decay_every_steps",
      "epochs", "pairs_per_epoch", "resample_each_epoch", "adam_beta1", "adam_beta2", "adam_epsilon", "train_seed",
      "checkpoint_every", "dropout_rate", "emd_cap",
      // registration
      "max_iterations", "epsilon", "icp_max_iterations", "icp_mse_tolerance", "icp_correspondence",
      "inference_precision",
      // benchmark / outputs
      "methods", "model", "test_pairs", "test_seed", "output_dir", "records_csv", "summary_csv", "seed"};
  return keys;
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::size_t number = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string line = trim(text.substr(pos, end - pos));
    ++number;
    pos = end + 1;
    if (!line.empty() && line[0] != '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("expected 'key = value'", number);
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      const auto& known = known_keys();
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw ParseError("unknown key '" + key + "'", number);
      }
      if (cfg.values_.count(key)) throw ParseError("duplicate key '" + key + "'", number);
      cfg.values_[key] = value;
      cfg.lines_[key] = number;
    }
    if (end == text.size()) break;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) { return parse(read_file(path)); }

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& known = known_keys();
  if (std::find(known.begin(), known.end(), key) == known.end()) {
    throw std::invalid_argument("unknown key '" + key + "'");
  }
  values_[key] = value;
  lines_[key] = 0;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v = 0.0;
  const std::string& s = it->second;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("key '" + key + "': expected a number, got '" + s + "'", lines_.at(key));
  }
  return v;
}

long RunConfig::get_long(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long v = 0;
  const std::string& s = it->second;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("key '" + key + "': expected an integer, got '" + s + "'", lines_.at(key));
  }
  return v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParseError("key '" + key + "': expected true or false, got '" + s + "'", lines_.at(key));
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const auto it = values_.find(key);
  if (it == values_.end()) return out;
  std::string_view s = it->second;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t end = std::min(s.find(',', pos), s.size());
    const std::string item = trim(s.substr(pos, end - pos));
    if (!item.empty()) out.push_back(item);
    if (end == s.size()) break;
    pos = end + 1;
  }
  return out;
}

void RunConfig::apply(TrainConfig& c) const {
  if (has("loss")) c.loss = parse_loss_kind(get_string("loss", ""));
  if (has("head")) c.head = parse_head_variant(get_string("head", ""));
  c.unroll_iterations = static_cast<int>(get_long("unroll_iterations", c.unroll_iterations));
  c.batch_size = static_cast<std::size_t>(get_long("batch_size", static_cast<long>(c.batch_size)));
  c.learning_rate = get_double("learning_rate", c.learning_rate);
  c.decay_factor = get_double("decay_factor", c.decay_factor);
  c.decay_every_steps = get_long("decay_every_steps", c.decay_every_steps);
  c.epochs = static_cast<int>(get_long("epochs", c.epochs));
  c.pairs_per_epoch = static_cast<std::size_t>(get_long("pairs_per_epoch", static_cast<long>(c.pairs_per_epoch)));
  c.resample_each_epoch = get_bool("resample_each_epoch", c.resample_each_epoch);
  c.adam.beta1 = get_double("adam_beta1", c.adam.beta1);
  c.adam.beta2 = get_double("adam_beta2", c.adam.beta2);
  c.adam.epsilon = get_double("adam_epsilon", c.adam.epsilon);
  c.seed = static_cast<std::uint64_t>(get_long("train_seed", get_long("seed", static_cast<long>(c.seed))));
  c.checkpoint_every = static_cast<int>(get_long("checkpoint_every", c.checkpoint_every));
  c.model.dropout_rate = get_double("dropout_rate", c.model.dropout_rate);
  c.emd_cap = static_cast<std::size_t>(get_long("emd_cap", static_cast<long>(c.emd_cap)));
  c.model.head = c.head;
  if (c.batch_size < 1 || c.pairs_per_epoch < 1) throw std::invalid_argument("batch_size and pairs_per_epoch must be >= 1");
}

void RunConfig::apply(RegistrationConfig& c) const {
  c.max_iterations = static_cast<int>(get_long("max_iterations", c.max_iterations));
  c.epsilon = get_double("epsilon", c.epsilon);
}

void RunConfig::apply(IcpConfig& c) const {
  c.max_iterations = static_cast<int>(get_long("icp_max_iterations", c.max_iterations));
  c.mse_tolerance = get_double("icp_mse_tolerance", c.mse_tolerance);
  if (has("icp_correspondence")) {
    const std::string s = get_string("icp_correspondence", "");
    if (s == "kdtree") c.correspondence = IcpConfig::Correspondence::kdtree;
    else if (s == "brute") c.correspondence = IcpConfig::Correspondence::brute;
    else throw ParseError("key 'icp_correspondence': expected kdtree or brute", lines_.at("icp_correspondence"));
  }
}

void RunConfig::apply(DatasetSpec& s) const {
  if (has("regime")) s.regime = parse_regime(get_string("regime", ""));
  s.points_per_cloud = static_cast<std::size_t>(get_long("points_per_cloud", static_cast<long>(s.points_per_cloud)));
  s.noise_sigma_max = get_double("noise_sigma_max", s.noise_sigma_max);
  s.partial_keep_min = get_double("partial_keep_min", s.partial_keep_min);
  if (has("sparsify_to")) {
    const long n = get_long("sparsify_to", 0);
    if (n < 0) throw ParseError("key 'sparsify_to' must be >= 0", lines_.at("sparsify_to"));
    s.sparsify_to = n == 0 ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(n));
  }
  s.max_angle_deg = get_double("max_angle_deg", s.max_angle_deg);
  s.max_translation = get_double("max_translation", s.max_translation);
  s.seed = static_cast<std::uint64_t>(get_long("data_seed", get_long("seed", static_cast<long>(s.seed))));
}

std::vector<PointCloud> RunConfig::load_templates() const {
  const long points = get_long("points_per_cloud", 1024);
  if (points < 1) throw std::invalid_argument("points_per_cloud must be >= 1");
  const auto seed = static_cast<std::uint64_t>(get_long("data_seed", get_long("seed", 1)));
  std::vector<PointCloud> raw;
  for (const auto& path : get_list("templates")) {
    std::string ext = path.size() >= 4 ? path.substr(path.size() - 4) : path;
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (ext == ".off") {
      // Oversample the surface, then farthest-point sample down.
      raw.push_back(sample_mesh(parse_off(read_file(path)), static_cast<std::size_t>(points) * 4, seed));
    } else {
      raw.push_back(load_cloud(path));
    }
  }
  if (raw.empty()) {
    raw.push_back(synth_shape(parse_shape_kind(get_string("shape", "l-bracket")), {},
                              static_cast<std::size_t>(points) * 4, seed));
  }
  return prepare_templates(raw, static_cast<std::size_t>(points), seed);
}

}  // namespace pcreg
