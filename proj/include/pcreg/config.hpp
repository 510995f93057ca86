#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pcreg/evaluation.hpp"
#include "pcreg/icp.hpp"
#include "pcreg/registration.hpp"
#include "pcreg/synth.hpp"
#include "pcreg/training.hpp"

namespace pcreg {

/// Flat `key = value` settings. Lines starting with '#' (after whitespace)
/// and blank lines are ignored; a key may appear once.
class RunConfig {
 public:
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::string& path);
  /// Every key accepted by parse().
  static const std::vector<std::string>& known_keys();

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  /// Sets or overrides a value; the key must be known.
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma separated

  /// Fill the structures from the keys present; absent keys keep the
  /// structure's current value.
  void apply(TrainConfig& cfg) const;
  void apply(RegistrationConfig& cfg) const;
  void apply(IcpConfig& cfg) const;
  /// Everything except the template clouds.
  void apply(DatasetSpec& spec) const;
  /// Template clouds: the files in `templates`, otherwise the synthetic
  /// `shape` (default l-bracket), normalized and resampled.
  std::vector<PointCloud> load_templates() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
};

}  // namespace pcreg
