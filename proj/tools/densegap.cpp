// densegap: train, evaluate, sweep, render and replay from the command line.
// Exit codes: 0 ok, 2 configuration error, 3 runtime fault.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "densegap/env/config.hpp"
#include "densegap/env/environment.hpp"
#include "densegap/harness/episode.hpp"
#include "densegap/harness/heatmap.hpp"
#include "densegap/harness/render.hpp"
#include "densegap/policy/trainer.hpp"

namespace fs = std::filesystem;
using namespace densegap;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeFault = 3;

struct ConfigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

env::ScenarioConfig config_or_default(const std::string& path) {
  return path.empty() ? env::ScenarioConfig{} : env::load_config(path);
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    T v;
    if (!(is >> v) || !is.eof()) throw ConfigFailure("bad list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigFailure("empty list");
  return out;
}

int default_workers() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, out;
  std::uint64_t steps = 500000, seed = 0;
  int envs = 8, epochs = 10, checkpoint_every = 10;
  double lr = 3e-4, entropy = 0.01, gamma = 0.99, failure_penalty = 0.0;
};

int run_train(const TrainArgs& a) {
  const auto cfg = config_or_default(a.config);
  policy::TrainConfig tc;
  tc.total_steps = a.steps;
  tc.seed = a.seed;
  tc.num_envs = a.envs;
  tc.ppo.epochs_per_update = a.epochs;
  tc.ppo.learning_rate = a.lr;
  tc.ppo.entropy_coefficient = a.entropy;
  tc.ppo.gamma = a.gamma;
  tc.failure_penalty = a.failure_penalty;
  tc.checkpoint_every = a.checkpoint_every;
  try {
    policy::validate(tc.ppo);
  } catch (const std::invalid_argument& e) {
    throw ConfigFailure(e.what());
  }
  if (tc.num_envs < 1) throw ConfigFailure("--envs must be positive");
  fs::create_directories(a.out);
  tc.checkpoint_path = (fs::path(a.out) / "checkpoint.bin").string();
  tc.curve_path = (fs::path(a.out) / "curve.csv").string();
  std::ofstream(fs::path(a.out) / "config.txt") << env::write_config(cfg);

  const auto result = policy::train(
      [&](int) { return std::make_unique<env::LaneChangeEnv>(cfg); }, tc,
      [](const policy::CurvePoint& p) {
        std::printf("update %d steps %llu median_reward %.3f entropy %.3f\n", p.update_index,
                    static_cast<unsigned long long>(p.env_steps), p.median_reward_last_10,
                    p.entropy);
        std::fflush(stdout);
      });
  if (result.faulted) {
    std::cerr << "training fault: " << result.fault << '\n';
    return kRuntimeFault;
  }
  std::printf("wrote %s\n", tc.checkpoint_path.c_str());
  return kOk;
}

struct EvalArgs {
  std::string controller, config, out;
  int episodes = 100, workers = 0;
  std::uint64_t seed = 0;
  bool logs = false, relaxed = false;
};

harness::ControllerFactory controller_or_fail(const std::string& spec) {
  try {
    return harness::parse_controller(spec);
  } catch (const harness::ControllerSpecError& e) {
    throw ConfigFailure(e.what());
  } catch (const policy::CheckpointError& e) {
    throw ConfigFailure(e.what());
  }
}

int run_eval(const EvalArgs& a) {
  auto cfg = config_or_default(a.config);
  if (a.relaxed) cfg.success_dwell = 0.0;
  const auto factory = controller_or_fail(a.controller);
  if (a.episodes < 1) throw ConfigFailure("--episodes must be positive");
  fs::create_directories(a.out);
  harness::EvalOptions opt;
  opt.workers = a.workers > 0 ? a.workers : default_workers();
  if (a.logs) opt.log_dir = fs::path(a.out) / "logs";
  harness::Evaluation ev;
  try {
    ev = harness::evaluate(factory, cfg, a.episodes, a.seed, opt);
  } catch (const env::ScenarioError& e) {
    throw ConfigFailure(e.what());
  }
  harness::write_episodes_jsonl(fs::path(a.out) / "episodes.jsonl", ev.episodes);
  harness::write_summary_json(fs::path(a.out) / "summary.json", ev.summary);
  std::cout << harness::to_json(ev.summary).dump(2) << '\n';
  return kOk;
}

struct HeatmapArgs {
  std::string controller, config, out = ".", vehicles, gaps;
  int episodes = 10, workers = 0;
  std::uint64_t seed = 0;
};

int run_heatmap(const HeatmapArgs& a) {
  const auto cfg = config_or_default(a.config);
  const auto factory = controller_or_fail(a.controller);
  const auto ns = parse_list<int>(a.vehicles);
  const auto gaps = parse_list<double>(a.gaps);
  if (a.episodes < 1) throw ConfigFailure("--episodes-per-cell must be positive");
  harness::EvalOptions opt;
  opt.workers = a.workers > 0 ? a.workers : default_workers();
  harness::HeatmapGrid g;
  try {
    g = harness::sweep_heatmap(factory, ns, gaps, cfg, a.episodes, a.seed, opt);
  } catch (const env::ConfigError& e) {
    throw ConfigFailure(e.what());
  }
  fs::create_directories(a.out);
  harness::write_heatmap_csv(fs::path(a.out) / "heatmap.csv", g);
  harness::write_heatmap_svg(fs::path(a.out) / "heatmap.svg", g,
                             "success rate: " + a.controller);
  std::ifstream csv(fs::path(a.out) / "heatmap.csv");
  std::cout << csv.rdbuf();
  return kOk;
}

int run_render(const std::string& log, const std::string& out) {
  const auto rep = harness::render_episode(log, out);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  std::printf("%d frames written to %s (%d lines skipped)\n", rep.frames, out.c_str(),
              rep.skipped);
  return kOk;
}

int run_replay(const std::string& log) {
  const auto rep = harness::replay_log_file(log);
  if (!rep.identical) {
    std::cerr << "replay diverged at " << rep.mismatch << '\n';
    return kRuntimeFault;
  }
  std::printf("replay identical over %d steps\n", rep.steps);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense-traffic lane change: training, evaluation and baselines"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a PPO policy");
  train->add_option("--config", ta.config, "scenario config file");
  train->add_option("--steps", ta.steps, "environment steps");
  train->add_option("--out", ta.out, "output directory")->required();
  train->add_option("--seed", ta.seed);
  train->add_option("--envs", ta.envs, "parallel environment instances");
  train->add_option("--epochs", ta.epochs, "PPO epochs per update");
  train->add_option("--lr", ta.lr);
  train->add_option("--entropy", ta.entropy, "entropy bonus coefficient");
  train->add_option("--gamma", ta.gamma);
  train->add_option("--failure-penalty", ta.failure_penalty,
                    "training-only penalty on collision, deadend and off-road endings");
  train->add_option("--checkpoint-every", ta.checkpoint_every, "updates between checkpoints");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluate a controller");
  eval->add_option("--controller", ea.controller, "ppo:CKPT | mpc:S,CF,CM | rule | brake")
      ->required();
  eval->add_option("--config", ea.config);
  eval->add_option("--episodes", ea.episodes);
  eval->add_option("--seed", ea.seed, "first episode seed");
  eval->add_option("--out", ea.out)->required();
  eval->add_option("--workers", ea.workers);
  eval->add_flag("--logs", ea.logs, "write one JSON-Lines log per episode");
  eval->add_flag("--relaxed", ea.relaxed, "success at lane entry");

  HeatmapArgs ha;
  auto* heat = app.add_subcommand("heatmap", "success rate over vehicle counts and gaps");
  heat->add_option("--controller", ha.controller)->required();
  heat->add_option("--vehicles", ha.vehicles, "comma-separated vehicle counts")->required();
  heat->add_option("--gaps", ha.gaps, "comma-separated gaps, m")->required();
  heat->add_option("--episodes-per-cell", ha.episodes);
  heat->add_option("--config", ha.config);
  heat->add_option("--seed", ha.seed);
  heat->add_option("--out", ha.out);
  heat->add_option("--workers", ha.workers);

  std::string render_log, render_out;
  auto* render = app.add_subcommand("render", "SVG frames from an episode log");
  render->add_option("--log", render_log)->required();
  render->add_option("--out", render_out)->required();

  std::string replay_log;
  auto* replay = app.add_subcommand("replay", "re-simulate a log and check it bit for bit");
  replay->add_option("--log", replay_log)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*train) return run_train(ta);
    if (*eval) return run_eval(ea);
    if (*heat) return run_heatmap(ha);
    if (*render) return run_render(render_log, render_out);
    if (*replay) return run_replay(replay_log);
  } catch (const ConfigFailure& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const env::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFault;
  }
  return kOk;
}
