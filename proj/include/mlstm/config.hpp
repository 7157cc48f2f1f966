#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mlstm/eval.hpp"
#include "mlstm/synth.hpp"
#include "mlstm/trackstore.hpp"

namespace mlstm {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Flat "key = value" settings. Lines starting with '#' are comments. Every
// key must appear in schema(); values are validated when read.
class Config {
 public:
  Config();

  static const std::vector<ConfigKey>& schema();

  void load(const std::filesystem::path& path);
  void parse(std::istream& in, const std::string& source = "<config>");
  // Throws ConfigError for unknown keys, listing the valid ones.
  void set(const std::string& key, const std::string& value);
  // "key=value" form used by --set.
  void set_assignment(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::uint64_t> get_seeds(const std::string& key) const;

  // Resolved settings in schema order, one "key = value" per line.
  void dump(std::ostream& os) const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t config_seed(const Config& c);
UnitMode config_units(const Config& c);
ModelConfig config_model(const Config& c);
TrainOptions config_trajectory_train(const Config& c);
TrainOptions config_classifier_train(const Config& c);
synth::SynthConfig config_synth(const Config& c);
CvFilterOptions config_cv(const Config& c);

}  // namespace mlstm
