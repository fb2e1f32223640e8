#pragma once

// Scenario configuration and its flat key-value file format.
//
// File format "densegap-config/1": one `key = value` pair per line, `#`
// starts a comment, blank lines are ignored. The first non-comment line must
// be `format = densegap-config/1`. Unknown keys are an error. Any key that is
// absent keeps its default.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace densegap::env {

inline constexpr const char* kConfigFormat = "densegap-config/1";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DriverMix { Cooperative, Mixed, Aggressive };

inline std::string to_string(DriverMix mix) {
  switch (mix) {
    case DriverMix::Cooperative: return "cooperative";
    case DriverMix::Mixed: return "mixed";
    case DriverMix::Aggressive: return "aggressive";
  }
  return "mixed";
}

inline DriverMix parse_driver_mix(const std::string& s) {
  if (s == "cooperative") return DriverMix::Cooperative;
  if (s == "mixed") return DriverMix::Mixed;
  if (s == "aggressive") return DriverMix::Aggressive;
  throw ConfigError("unknown driver_mix '" + s + "'");
}

struct RewardWeights {
  double lambda_v = 0.05;
  double lambda_t = 0.1;
  double lambda_phi = 1.0;
  double lambda_j = 0.01;
  double lambda_sr = 0.1;
  double lambda_d = 2.0;

  bool operator==(const RewardWeights&) const = default;
};

/// Normalisation constants for the observation.
struct ObservationScales {
  double v_norm = 5.0;     // m/s
  double psi_norm = 1.0;   // rad
  double a_norm = 4.0;     // m/s^2
  double delta_norm = 0.6; // rad
  double jerk_norm = 4.0;  // m/s^3
  double sr_norm = 0.4;    // rad/s

  bool operator==(const ObservationScales&) const = default;
};

struct ScenarioConfig {
  int n_vehicles = 60;
  double v_des_min = 2.0, v_des_max = 5.0;
  double gap_min = 0.5, gap_max = 3.0;
  double deadend_min = 5.0, deadend_max = 40.0;
  int lane_count = 3;
  double lane_width = 3.0;
  double road_length = 1000.0;
  double dt = 0.2;
  int fov = 50;
  double timeout = 40.0;
  double success_dwell = 5.0;  // 0 gives the relaxed lane-entry criterion
  DriverMix driver_mix = DriverMix::Mixed;
  double stop_and_go_fraction = 0.0;
  double ego_v_des_min = 2.0, ego_v_des_max = 5.0;
  double lambda_p_min = -0.15, lambda_p_max = 0.15;
  double lambda_p_scale = 1.0;  // multiplies lambda_p; 1 means metres
  bool require_occupancy = true;
  RewardWeights reward_weights;
  ObservationScales scales;
  std::uint64_t seed = 0;

  bool operator==(const ScenarioConfig&) const = default;
};

inline void validate(const ScenarioConfig& c) {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  check(c.n_vehicles >= 1 && c.n_vehicles <= 100, "n_vehicles must be in [1, 100]");
  check(c.v_des_min >= 2.0 && c.v_des_max <= 5.0 && c.v_des_min <= c.v_des_max,
        "v_des range must lie within [2, 5]");
  check(c.gap_min >= 0.5 && c.gap_max <= 10.0 && c.gap_min <= c.gap_max,
        "gap range must lie within [0.5, 10]");
  check(c.deadend_min >= 5.0 && c.deadend_max <= 40.0 &&
            c.deadend_min <= c.deadend_max,
        "deadend range must lie within [5, 40]");
  check(c.lane_count == 2 || c.lane_count == 3, "lane_count must be 2 or 3");
  check(c.lane_width > 1.8, "lane_width must exceed the vehicle width");
  check(c.road_length >= 200.0, "road_length must be at least 200 m");
  check(std::abs(c.dt - 0.2) < 1e-12, "dt must be 0.2 s");
  check(c.fov >= 5 && c.fov <= 200, "fov must be in [5, 200]");
  check(c.timeout > 0.0, "timeout must be positive");
  check(c.success_dwell >= 0.0, "success_dwell must be non-negative");
  check(c.stop_and_go_fraction >= 0.0 && c.stop_and_go_fraction <= 1.0,
        "stop_and_go_fraction must be in [0, 1]");
  check(c.ego_v_des_min >= 2.0 && c.ego_v_des_max <= 5.0 &&
            c.ego_v_des_min <= c.ego_v_des_max,
        "ego_v_des range must lie within [2, 5]");
  check(c.lambda_p_min >= -0.15 && c.lambda_p_max <= 0.15 &&
            c.lambda_p_min <= c.lambda_p_max,
        "lambda_p range must lie within [-0.15, 0.15]");
  check(c.lambda_p_scale > 0.0, "lambda_p_scale must be positive");
  const RewardWeights& w = c.reward_weights;
  for (double x : {w.lambda_v, w.lambda_t, w.lambda_phi, w.lambda_j, w.lambda_sr,
                   w.lambda_d}) {
    check(std::isfinite(x) && x >= 0.0, "reward weights must be finite and >= 0");
  }
  const ObservationScales& s = c.scales;
  for (double x : {s.v_norm, s.psi_norm, s.a_norm, s.delta_norm, s.jerk_norm,
                   s.sr_norm}) {
    check(std::isfinite(x) && x > 0.0, "observation scales must be positive");
  }
}

namespace detail {

inline std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + value + "'");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::map<std::string, std::string> config_entries(const ScenarioConfig& c) {
  using detail::format_double;
  std::map<std::string, std::string> m;
  m["n_vehicles"] = std::to_string(c.n_vehicles);
  m["v_des_min"] = format_double(c.v_des_min);
  m["v_des_max"] = format_double(c.v_des_max);
  m["gap_min"] = format_double(c.gap_min);
  m["gap_max"] = format_double(c.gap_max);
  m["deadend_min"] = format_double(c.deadend_min);
  m["deadend_max"] = format_double(c.deadend_max);
  m["lane_count"] = std::to_string(c.lane_count);
  m["lane_width"] = format_double(c.lane_width);
  m["road_length"] = format_double(c.road_length);
  m["dt"] = format_double(c.dt);
  m["fov"] = std::to_string(c.fov);
  m["timeout"] = format_double(c.timeout);
  m["success_dwell"] = format_double(c.success_dwell);
  m["driver_mix"] = to_string(c.driver_mix);
  m["stop_and_go_fraction"] = format_double(c.stop_and_go_fraction);
  m["ego_v_des_min"] = format_double(c.ego_v_des_min);
  m["ego_v_des_max"] = format_double(c.ego_v_des_max);
  m["lambda_p_min"] = format_double(c.lambda_p_min);
  m["lambda_p_max"] = format_double(c.lambda_p_max);
  m["lambda_p_scale"] = format_double(c.lambda_p_scale);
  m["require_occupancy"] = c.require_occupancy ? "true" : "false";
  m["reward.lambda_v"] = format_double(c.reward_weights.lambda_v);
  m["reward.lambda_t"] = format_double(c.reward_weights.lambda_t);
  m["reward.lambda_phi"] = format_double(c.reward_weights.lambda_phi);
  m["reward.lambda_j"] = format_double(c.reward_weights.lambda_j);
  m["reward.lambda_sr"] = format_double(c.reward_weights.lambda_sr);
  m["reward.lambda_d"] = format_double(c.reward_weights.lambda_d);
  m["obs.v_norm"] = format_double(c.scales.v_norm);
  m["obs.psi_norm"] = format_double(c.scales.psi_norm);
  m["obs.a_norm"] = format_double(c.scales.a_norm);
  m["obs.delta_norm"] = format_double(c.scales.delta_norm);
  m["obs.jerk_norm"] = format_double(c.scales.jerk_norm);
  m["obs.sr_norm"] = format_double(c.scales.sr_norm);
  m["seed"] = std::to_string(c.seed);
  return m;
}

inline std::string write_config(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "format = " << kConfigFormat << "\n";
  for (const auto& [k, v] : config_entries(c)) os << k << " = " << v << "\n";
  return os.str();
}

inline void apply_entry(ScenarioConfig& c, const std::string& key,
                        const std::string& value) {
  using namespace detail;
  auto d = [&](double& field) { field = parse_double(key, value); };
  if (key == "n_vehicles") c.n_vehicles = static_cast<int>(parse_int(key, value));
  else if (key == "v_des_min") d(c.v_des_min);
  else if (key == "v_des_max") d(c.v_des_max);
  else if (key == "gap_min") d(c.gap_min);
  else if (key == "gap_max") d(c.gap_max);
  else if (key == "deadend_min") d(c.deadend_min);
  else if (key == "deadend_max") d(c.deadend_max);
  else if (key == "lane_count") c.lane_count = static_cast<int>(parse_int(key, value));
  else if (key == "lane_width") d(c.lane_width);
  else if (key == "road_length") d(c.road_length);
  else if (key == "dt") d(c.dt);
  else if (key == "fov") c.fov = static_cast<int>(parse_int(key, value));
  else if (key == "timeout") d(c.timeout);
  else if (key == "success_dwell") d(c.success_dwell);
  else if (key == "driver_mix") c.driver_mix = parse_driver_mix(value);
  else if (key == "stop_and_go_fraction") d(c.stop_and_go_fraction);
  else if (key == "ego_v_des_min") d(c.ego_v_des_min);
  else if (key == "ego_v_des_max") d(c.ego_v_des_max);
  else if (key == "lambda_p_min") d(c.lambda_p_min);
  else if (key == "lambda_p_max") d(c.lambda_p_max);
  else if (key == "lambda_p_scale") d(c.lambda_p_scale);
  else if (key == "require_occupancy") c.require_occupancy = parse_bool(key, value);
  else if (key == "reward.lambda_v") d(c.reward_weights.lambda_v);
  else if (key == "reward.lambda_t") d(c.reward_weights.lambda_t);
  else if (key == "reward.lambda_phi") d(c.reward_weights.lambda_phi);
  else if (key == "reward.lambda_j") d(c.reward_weights.lambda_j);
  else if (key == "reward.lambda_sr") d(c.reward_weights.lambda_sr);
  else if (key == "reward.lambda_d") d(c.reward_weights.lambda_d);
  else if (key == "obs.v_norm") d(c.scales.v_norm);
  else if (key == "obs.psi_norm") d(c.scales.psi_norm);
  else if (key == "obs.a_norm") d(c.scales.a_norm);
  else if (key == "obs.delta_norm") d(c.scales.delta_norm);
  else if (key == "obs.jerk_norm") d(c.scales.jerk_norm);
  else if (key == "obs.sr_norm") d(c.scales.sr_norm);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

inline ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig c;
  std::istringstream in(text);
  std::string line;
  bool saw_format = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!saw_format) {
      if (key != "format" || value != kConfigFormat) {
        throw ConfigError(std::string("first entry must be 'format = ") +
                          kConfigFormat + "'");
      }
      saw_format = true;
      continue;
    }
    apply_entry(c, key, value);
  }
  if (!saw_format) throw ConfigError("missing format line");
  validate(c);
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace densegap::env
