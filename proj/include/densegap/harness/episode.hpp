#pragma once

// Episode runner, JSON-Lines episode logs, replay, and evaluation summaries.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "densegap/env/config.hpp"
#include "densegap/env/environment.hpp"
#include "densegap/harness/controllers.hpp"

namespace densegap::harness {

using nlohmann::json;

inline constexpr const char* kLogFormat = "densegap-log/1";

struct EpisodeResult {
  env::Outcome outcome = env::Outcome::Running;
  std::optional<double> time_to_merge;    // dwell completion, s
  std::optional<double> lane_entry_time;  // start of the successful dwell, s
  double min_separation = std::numeric_limits<double>::infinity();
  double cumulative_reward = 0.0;
  std::uint64_t seed = 0;
  int steps = 0;
  bool valid = true;
  std::string error;

  bool operator==(const EpisodeResult&) const = default;
};

inline json to_json(const EpisodeResult& r) {
  json j;
  j["seed"] = r.seed;
  j["outcome"] = env::to_string(r.outcome);
  j["time_to_merge"] = r.time_to_merge ? json(*r.time_to_merge) : json(nullptr);
  j["lane_entry_time"] = r.lane_entry_time ? json(*r.lane_entry_time) : json(nullptr);
  j["min_separation"] = std::isfinite(r.min_separation) ? json(r.min_separation) : json(nullptr);
  j["cumulative_reward"] = r.cumulative_reward;
  j["steps"] = r.steps;
  j["valid"] = r.valid;
  if (!r.valid) j["error"] = r.error;
  return j;
}

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

// ---------------------------------------------------------------------------
// Log records

inline json header_record(const env::SimState& sim, const std::string& controller,
                          std::uint64_t seed) {
  json h;
  h["format"] = kLogFormat;
  h["controller"] = controller;
  h["seed"] = seed;
  h["config"] = env::write_config(sim.cfg);
  const auto& road = sim.world.road;
  h["road"] = {{"lane_count", road.lane_count},
               {"lane_width", road.lane_width},
               {"road_length", road.road_length},
               {"deadend_s", road.deadend_s},
               {"deadend_lane", sim.world.deadend_lane},
               {"deadend_length", sim.world.deadend_length}};
  h["target_lane"] = sim.target_lane;
  json pc = json::array();
  for (const auto& v : sim.world.vehicles) pc.push_back(v.profile.p_c);
  h["p_c"] = pc;
  return h;
}

inline json command_json(const Command& c) {
  if (c.kind == Command::Kind::Action)
    return {{"kind", "action"}, {"jerk", c.action.jerk}, {"steer_rate", c.action.steer_rate}};
  return {{"kind", "control"}, {"a", c.control.a_cmd}, {"delta", c.control.delta_cmd}};
}

inline Command command_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "action")
    return Command::of(env::EgoAction{j.at("jerk").get<double>(), j.at("steer_rate").get<double>()});
  if (kind == "control")
    return Command::of(sim::ControlInput{j.at("a").get<double>(), j.at("delta").get<double>()});
  throw std::invalid_argument("unknown command kind '" + kind + "'");
}

inline json step_record(const env::SimState& sim, const Command& cmd, const env::StepResult& r) {
  json s;
  s["k"] = sim.step_index;
  s["t"] = r.info.time;
  s["cmd"] = command_json(cmd);
  const auto& e = sim.ego().state;
  s["ego"] = {e.x, e.y, e.psi, e.v, e.a, e.delta};
  s["reward"] = r.reward;
  s["outcome"] = env::to_string(r.outcome);
  s["min_separation"] = std::isfinite(r.info.min_separation) ? json(r.info.min_separation)
                                                             : json(nullptr);
  s["world_hash"] = hex64(env::world_hash(sim.world));
  json poses = json::array();
  for (const auto& v : sim.world.vehicles)
    poses.push_back({v.state.x, v.state.y, v.state.psi});
  s["poses"] = poses;
  return s;
}

// ---------------------------------------------------------------------------
// Runner

/// Rolls an episode from a prepared state to a terminal outcome. Controller
/// exceptions mark the episode invalid; scenario errors propagate.
inline EpisodeResult run_from(Controller& controller, env::SimState sim, std::uint64_t seed,
                              std::ostream* log = nullptr) {
  EpisodeResult res;
  res.seed = seed;
  env::Observation obs = env::encode_observation(sim);
  res.min_separation = env::ego_min_separation(sim.world);
  if (log) *log << header_record(sim, controller.name(), seed).dump() << '\n';
  try {
    controller.reset(sim, seed);
    while (!env::is_terminal(sim.outcome)) {
      const Command cmd = controller.act(sim, obs);
      auto r = apply(sim, cmd);
      res.cumulative_reward += r.reward;
      res.min_separation = std::min(res.min_separation, r.info.min_separation);
      res.steps += 1;
      if (log) *log << step_record(sim, cmd, r).dump() << '\n';
      obs = std::move(r.obs);
    }
  } catch (const env::ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    res.valid = false;
    res.error = e.what();
  }
  res.outcome = sim.outcome;
  if (sim.outcome == env::Outcome::Success) {
    res.time_to_merge = sim.success_time;
    res.lane_entry_time = sim.lane_entry_time;
  }
  if (sim.outcome == env::Outcome::Collision) res.min_separation = 0.0;
  if (log) *log << json{{"result", to_json(res)}}.dump() << '\n';
  return res;
}

inline EpisodeResult run_episode(Controller& controller, const env::ScenarioConfig& cfg,
                                 std::uint64_t seed, std::ostream* log = nullptr) {
  return run_from(controller, env::sample_scenario(cfg, seed), seed, log);
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayReport {
  int steps = 0;
  bool identical = true;
  std::string mismatch;  // first difference, empty when identical
};

class LogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Re-simulates a logged episode from its config and seed, feeding the
/// logged commands, and compares every state hash, ego state and reward
/// bit for bit.
inline ReplayReport replay_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw LogError("empty log");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw LogError(std::string("bad header: ") + e.what());
  }
  if (header.value("format", "") != kLogFormat) throw LogError("not a densegap-log/1 file");
  env::ScenarioConfig cfg;
  std::uint64_t seed = 0;
  try {
    cfg = env::parse_config(header.at("config").get<std::string>());
    seed = header.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw LogError(std::string("bad header: ") + e.what());
  }
  env::SimState sim = env::sample_scenario(cfg, seed);

  ReplayReport rep;
  auto fail = [&](const std::string& what) {
    rep.identical = false;
    rep.mismatch = "step " + std::to_string(rep.steps) + ": " + what;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw LogError("line " + std::to_string(rep.steps + 2) + ": " + e.what());
    }
    if (rec.contains("result")) break;
    if (env::is_terminal(sim.outcome)) {
      fail("log continues after the episode ended");
      break;
    }
    try {
      const auto r = apply(sim, command_from_json(rec.at("cmd")));
      rep.steps += 1;
      const auto& e = sim.ego().state;
      const std::vector<double> ego{e.x, e.y, e.psi, e.v, e.a, e.delta};
      if (rec.at("world_hash").get<std::string>() != hex64(env::world_hash(sim.world))) {
        fail("world hash differs");
        break;
      }
      if (rec.at("ego").get<std::vector<double>>() != ego) {
        fail("ego state differs");
        break;
      }
      if (rec.at("reward").get<double>() != r.reward) {
        fail("reward differs");
        break;
      }
      if (rec.at("outcome").get<std::string>() != env::to_string(r.outcome)) {
        fail("outcome differs");
        break;
      }
    } catch (const json::exception& ex) {
      throw LogError("line " + std::to_string(rep.steps + 2) + ": " + ex.what());
    }
  }
  return rep;
}

inline ReplayReport replay_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LogError("cannot open " + path);
  return replay_log(in);
}

// ---------------------------------------------------------------------------
// Evaluation

struct Stat {
  double mean = 0.0;
  std::optional<double> std;  // sample standard deviation; absent for n < 2
};

/// Mean and sample standard deviation; absent for an empty sample.
inline std::optional<Stat> describe(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  Stat s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct EvaluationSummary {
  std::string controller;
  int n_episodes = 0;  // valid episodes
  int n_invalid = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::optional<Stat> m1;  // time to merge over successes
  std::optional<Stat> m2;  // minimum separation over successes
  std::map<std::string, int> counts;
};

inline json to_json(const EvaluationSummary& s) {
  auto stat = [](const std::optional<Stat>& st) {
    if (!st) return json(nullptr);
    return json{{"mean", st->mean}, {"std", st->std ? json(*st->std) : json(nullptr)}};
  };
  return {{"controller", s.controller}, {"n_episodes", s.n_episodes},
          {"n_invalid", s.n_invalid},   {"successes", s.successes},
          {"success_rate", s.success_rate}, {"m1_time_to_merge", stat(s.m1)},
          {"m2_min_separation", stat(s.m2)}, {"counts", s.counts}};
}

inline EvaluationSummary summarize(const std::string& controller,
                                   const std::vector<EpisodeResult>& eps) {
  EvaluationSummary s;
  s.controller = controller;
  for (env::Outcome o : {env::Outcome::Success, env::Outcome::Collision,
                         env::Outcome::DeadendOverrun, env::Outcome::OffRoad,
                         env::Outcome::Timeout})
    s.counts[env::to_string(o)] = 0;
  std::vector<double> m1, m2;
  for (const auto& e : eps) {
    if (!e.valid) {
      s.n_invalid += 1;
      continue;
    }
    s.n_episodes += 1;
    s.counts[env::to_string(e.outcome)] += 1;
    if (e.outcome == env::Outcome::Success) {
      s.successes += 1;
      m1.push_back(*e.time_to_merge);
      m2.push_back(e.min_separation);
    }
  }
  s.success_rate = s.n_episodes > 0 ? static_cast<double>(s.successes) / s.n_episodes : 0.0;
  s.m1 = describe(m1);
  s.m2 = describe(m2);
  return s;
}

struct Evaluation {
  EvaluationSummary summary;
  std::vector<EpisodeResult> episodes;  // index i ran seed0 + i
};

struct EvalOptions {
  int workers = 1;
  std::optional<std::filesystem::path> log_dir;  // one JSON-Lines log per episode
};

inline std::filesystem::path episode_log_path(const std::filesystem::path& dir,
                                              std::uint64_t seed) {
  return dir / ("episode_" + std::to_string(seed) + ".jsonl");
}

/// Runs seeds seed0 .. seed0 + n - 1, in parallel when workers > 1. Results
/// are stored by episode index, so the summary does not depend on scheduling.
inline Evaluation evaluate(const ControllerFactory& factory, const env::ScenarioConfig& cfg,
                           int n, std::uint64_t seed0, const EvalOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("evaluate needs at least one episode");
  env::validate(cfg);
  env::detail::check_packing(cfg);
  if (opt.log_dir) std::filesystem::create_directories(*opt.log_dir);

  std::vector<EpisodeResult> eps(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  std::string name;
  {
    auto probe = factory();
    name = probe->name();
  }
  auto worker = [&] {
    auto ctl = factory();
    for (int i = next++; i < n; i = next++) {
      const std::uint64_t seed = seed0 + static_cast<std::uint64_t>(i);
      try {
        if (opt.log_dir) {
          std::ofstream out(episode_log_path(*opt.log_dir, seed));
          eps[static_cast<std::size_t>(i)] = run_episode(*ctl, cfg, seed, &out);
        } else {
          eps[static_cast<std::size_t>(i)] = run_episode(*ctl, cfg, seed);
        }
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
      }
    }
  };
  const int workers = std::max(1, std::min(opt.workers, n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw env::ScenarioError(e);

  Evaluation ev;
  ev.episodes = std::move(eps);
  ev.summary = summarize(name, ev.episodes);
  return ev;
}

inline void write_episodes_jsonl(const std::filesystem::path& path,
                                 const std::vector<EpisodeResult>& eps) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : eps) out << to_json(e).dump() << '\n';
}

inline void write_summary_json(const std::filesystem::path& path, const EvaluationSummary& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(s).dump(2) << '\n';
}

}  // namespace densegap::harness
