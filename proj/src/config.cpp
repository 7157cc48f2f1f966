#include "mlstm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mlstm/error.hpp"

namespace mlstm {
namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string valid_keys() {
  std::string out;
  for (const auto& k : Config::schema()) out += (out.empty() ? "" : ", ") + k.name;
  return out;
}

}  // namespace

const std::vector<ConfigKey>& Config::schema() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "1", "master seed for splits, init, shuffling and synthesis"},
      {"workers", "0", "OpenMP threads; 0 uses all available"},
      {"units", "feet", "input trajectory units: feet or meters"},
      {"stride", "10", "frames between consecutive samples of one vehicle"},
      {"variant", "M_LSTM", "V_LSTM, S_LSTM, M_LSTM or M_LSTM_GT"},
      {"hidden", "128", "LSTM hidden units"},
      {"embed", "64", "input embedding width"},
      {"leaky_alpha", "0.1", "leaky ReLU slope"},
      {"position_scale", "10", "meters per network position unit, longitudinal axis"},
      {"lateral_scale", "1", "meters per network position unit, lateral axis"},
      {"epochs", "30", "trajectory training epochs"},
      {"classifier_epochs", "30", "classifier training epochs"},
      {"batch", "128", "minibatch size"},
      {"lr", "0.001", "Adam learning rate"},
      {"classifier_lr", "", "classifier learning rate; empty means lr"},
      {"clip_norm", "0", "global gradient norm limit per step; 0 disables"},
      {"ablation.seeds", "1", "comma-separated training seeds for ablate"},
      {"cv.measurement_std", "0.5", "CV filter measurement noise (m)"},
      {"cv.accel_std", "1.0", "CV filter white-acceleration noise (m/s^2)"},
      {"synth.n_vehicles", "40", "vehicles to generate"},
      {"synth.n_lanes", "3", "lanes"},
      {"synth.duration_s", "60", "scene length (s)"},
      {"synth.lane_width_m", "3.7", "lane width (m)"},
      {"synth.pct_lane_changes", "0.2", "fraction of vehicles changing lanes"},
      {"synth.pct_braking", "0.2", "fraction of vehicles braking"},
      {"synth.speed_min", "20", "minimum cruise speed (m/s)"},
      {"synth.speed_max", "30", "maximum cruise speed (m/s)"},
      {"synth.platoon", "false", "followers replay their lane leader's speed profile"},
      {"synth.headway_min_s", "1.5", "platoon headway lower bound (s)"},
      {"synth.headway_max_s", "2.5", "platoon headway upper bound (s)"},
      {"synth.brake_ratio_min", "0.4", "hard-brake speed ratio lower bound"},
      {"synth.brake_ratio_max", "0.6", "hard-brake speed ratio upper bound"},
  };
  return keys;
}

Config::Config() {
  for (const auto& k : schema()) values_[k.name] = k.default_value;
}

void Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  parse(in, path.string());
}

void Config::parse(std::istream& in, const std::string& source) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

void Config::set(const std::string& key, const std::string& value) {
  if (!values_.contains(key)) {
    throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid_keys());
  }
  values_[key] = value;
}

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError(key + ": '" + v + "' is not an integer");
  }
  return out;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": '" + v + "' is not a number");
}

bool Config::get_bool(const std::string& key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

std::vector<std::uint64_t> Config::get_seeds(const std::string& key) const {
  std::vector<std::uint64_t> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || p != item.data() + item.size()) {
      throw ConfigError(key + ": '" + item + "' is not a seed");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(key + ": no seeds");
  return out;
}

void Config::dump(std::ostream& os) const {
  for (const auto& k : schema()) os << k.name << " = " << values_.at(k.name) << '\n';
}

std::uint64_t config_seed(const Config& c) {
  const std::int64_t s = c.get_int("seed");
  if (s < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

UnitMode config_units(const Config& c) {
  const std::string& u = c.get("units");
  if (u == "feet") return UnitMode::Feet;
  if (u == "meters") return UnitMode::Meters;
  throw ConfigError("units: expected feet or meters, got '" + u + "'");
}

ModelConfig config_model(const Config& c) {
  ModelConfig m;
  m.variant = variant_from_string(c.get("variant"));
  m.hidden = static_cast<int>(c.get_int("hidden"));
  m.embed = static_cast<int>(c.get_int("embed"));
  m.leaky_alpha = c.get_double("leaky_alpha");
  m.position_scale = c.get_double("position_scale");
  if (m.hidden < 1 || m.embed < 1) throw ConfigError("hidden and embed must be >= 1");
  if (!(m.position_scale > 0.0)) throw ConfigError("position_scale must be > 0");
  m.lateral_scale = c.get_double("lateral_scale");
  if (!(m.lateral_scale > 0.0)) throw ConfigError("lateral_scale must be > 0");
  return m;
}

namespace {

TrainOptions train_options(const Config& c, const char* epochs_key, const char* lr_key) {
  TrainOptions t;
  t.epochs = static_cast<int>(c.get_int(epochs_key));
  t.batch = static_cast<int>(c.get_int("batch"));
  t.lr = c.get(lr_key).empty() ? c.get_double("lr") : c.get_double(lr_key);
  t.clip_norm = c.get_double("clip_norm");
  t.seed = config_seed(c);
  if (!(t.clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
  if (t.epochs < 1 || t.batch < 1) throw ConfigError("epochs and batch must be >= 1");
  if (!(t.lr > 0.0)) throw ConfigError("lr must be > 0");
  return t;
}

}  // namespace

TrainOptions config_trajectory_train(const Config& c) { return train_options(c, "epochs", "lr"); }
TrainOptions config_classifier_train(const Config& c) {
  return train_options(c, "classifier_epochs", "classifier_lr");
}

synth::SynthConfig config_synth(const Config& c) {
  synth::SynthConfig s;
  s.n_vehicles = static_cast<int>(c.get_int("synth.n_vehicles"));
  s.n_lanes = static_cast<int>(c.get_int("synth.n_lanes"));
  s.duration_s = c.get_double("synth.duration_s");
  s.lane_width_m = c.get_double("synth.lane_width_m");
  s.pct_lane_changes = c.get_double("synth.pct_lane_changes");
  s.pct_braking = c.get_double("synth.pct_braking");
  s.speed_min = c.get_double("synth.speed_min");
  s.speed_max = c.get_double("synth.speed_max");
  s.platoon = c.get_bool("synth.platoon");
  s.headway_min_s = c.get_double("synth.headway_min_s");
  s.headway_max_s = c.get_double("synth.headway_max_s");
  s.brake_ratio_min = c.get_double("synth.brake_ratio_min");
  s.brake_ratio_max = c.get_double("synth.brake_ratio_max");
  return s;
}

CvFilterOptions config_cv(const Config& c) {
  CvFilterOptions o;
  o.measurement_std = c.get_double("cv.measurement_std");
  o.accel_std = c.get_double("cv.accel_std");
  if (!(o.measurement_std > 0.0) || !(o.accel_std > 0.0)) {
    throw ConfigError("cv noise levels must be > 0");
  }
  return o;
}

}  // namespace mlstm
