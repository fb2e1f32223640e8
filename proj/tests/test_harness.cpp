#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "densegap/harness/episode.hpp"
#include "densegap/harness/heatmap.hpp"
#include "densegap/harness/render.hpp"
#include "densegap/policy/ppo.hpp"
#include "env_fixtures.hpp"

using namespace densegap;
using namespace densegap::harness;
namespace fs = std::filesystem;

namespace {

env::ScenarioConfig small_config() {
  env::ScenarioConfig cfg;
  cfg.lane_count = 2;
  cfg.n_vehicles = 10;
  cfg.driver_mix = env::DriverMix::Cooperative;
  return cfg;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("densegap_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

class Throwing final : public Controller {
 public:
  std::string name() const override { return "throwing"; }
  Command act(const env::SimState& s, const env::Observation&) override {
    if (s.step_index == 3) throw std::runtime_error("controller fault");
    return Command::of(env::EgoAction{});
  }
};

}  // namespace

TEST(Episode, BrakingForeverTimesOut) {
  auto ctl = always_brake()();
  const auto r = run_episode(*ctl, small_config(), 4);
  EXPECT_EQ(r.outcome, env::Outcome::Timeout);
  EXPECT_NEAR(r.steps * 0.2, 40.2, 1e-9);
  EXPECT_FALSE(r.time_to_merge);
  EXPECT_GT(r.min_separation, 0.0);
}

TEST(Episode, DrivingIntoLeaderCollides) {
  auto s = fixtures::lone_ego(100.0, 1.5, 3.0, 2);
  s.world.vehicles.push_back(fixtures::parked(1, 112.0, 1.5));
  ScriptedController ctl({}, Command::of(sim::ControlInput{2.0, 0.0}));
  const auto r = run_from(ctl, s, 0);
  EXPECT_EQ(r.outcome, env::Outcome::Collision);
  EXPECT_EQ(r.min_separation, 0.0);
}

TEST(Episode, DeterministicForFixedTriple) {
  const auto cfg = small_config();
  RuleController a, b;
  const auto ra = run_episode(a, cfg, 17);
  const auto rb = run_episode(b, cfg, 17);
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(to_json(ra).dump(), to_json(rb).dump());
}

TEST(Episode, ControllerFaultMarksInvalid) {
  Throwing ctl;
  const auto r = run_episode(ctl, small_config(), 1);
  EXPECT_FALSE(r.valid);
  EXPECT_EQ(r.error, "controller fault");
  EXPECT_EQ(r.steps, 3);
  const auto s = summarize("throwing", {r});
  EXPECT_EQ(s.n_episodes, 0);
  EXPECT_EQ(s.n_invalid, 1);
}

TEST(Episode, SuccessReportsDwellCompletion) {
  RuleController ctl;
  const auto r = run_episode(ctl, small_config(), 2);
  ASSERT_EQ(r.outcome, env::Outcome::Success);
  ASSERT_TRUE(r.time_to_merge && r.lane_entry_time);
  EXPECT_NEAR(*r.time_to_merge - *r.lane_entry_time, 5.0, 0.2 + 1e-9);
  EXPECT_NEAR(*r.time_to_merge, r.steps * 0.2, 1e-9);
}

TEST(Evaluate, AlwaysBrake) {
  const auto ev = evaluate(always_brake(), small_config(), 3, 10);
  EXPECT_EQ(ev.summary.success_rate, 0.0);
  EXPECT_FALSE(ev.summary.m1);
  EXPECT_FALSE(ev.summary.m2);
  EXPECT_EQ(ev.summary.counts.at("Timeout"), 3);
  EXPECT_TRUE(to_json(ev.summary)["m1_time_to_merge"].is_null());
}

TEST(Evaluate, SingleEpisodeHasNoSpread) {
  const auto ev = evaluate([] { return std::make_unique<RuleController>(); }, small_config(), 1, 2);
  ASSERT_EQ(ev.summary.successes, 1);
  ASSERT_TRUE(ev.summary.m1);
  EXPECT_FALSE(ev.summary.m1->std);
}

TEST(Evaluate, ReproducibleAcrossWorkerCounts) {
  const auto cfg = small_config();
  auto f = [] { return std::make_unique<RuleController>(); };
  const auto one = evaluate(f, cfg, 6, 40, {1, {}});
  const auto three = evaluate(f, cfg, 6, 40, {3, {}});
  EXPECT_EQ(one.episodes, three.episodes);
  EXPECT_EQ(to_json(one.summary).dump(), to_json(three.summary).dump());
}

TEST(Evaluate, SummaryInvariants) {
  auto cfg = small_config();
  cfg.driver_mix = env::DriverMix::Mixed;
  const auto ev = evaluate([] { return std::make_unique<RuleController>(); }, cfg, 12, 70);
  const auto& s = ev.summary;
  int total = 0;
  for (const auto& [k, c] : s.counts) total += c;
  EXPECT_EQ(total, s.n_episodes);
  EXPECT_EQ(s.success_rate * s.n_episodes, static_cast<double>(s.counts.at("Success")));
  for (const auto& e : ev.episodes) {
    EXPECT_EQ(e.seed, 70u + static_cast<std::uint64_t>(&e - ev.episodes.data()));
    if (e.outcome == env::Outcome::Success) EXPECT_LE(*e.time_to_merge, cfg.timeout);
    if (e.outcome != env::Outcome::Collision) EXPECT_GT(e.min_separation, 0.0);
    EXPECT_GE(e.min_separation, 0.0);
  }
}

TEST(Evaluate, WritesArtifacts) {
  const auto dir = scratch("eval");
  const auto ev = evaluate(always_brake(), small_config(), 2, 5, {1, dir});
  write_episodes_jsonl(dir / "episodes.jsonl", ev.episodes);
  write_summary_json(dir / "summary.json", ev.summary);
  EXPECT_TRUE(fs::exists(episode_log_path(dir, 5)));
  EXPECT_TRUE(fs::exists(episode_log_path(dir, 6)));
  std::ifstream in(dir / "episodes.jsonl");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 2);
}

TEST(Replay, LoggedEpisodeIsBitExact) {
  std::stringstream log;
  RuleController ctl;
  auto cfg = small_config();
  cfg.driver_mix = env::DriverMix::Mixed;
  cfg.stop_and_go_fraction = 0.5;
  const auto r = run_episode(ctl, cfg, 9, &log);
  std::stringstream copy(log.str());
  const auto rep = replay_log(copy);
  EXPECT_TRUE(rep.identical) << rep.mismatch;
  EXPECT_EQ(rep.steps, r.steps);
}

TEST(Replay, PolicyCommandsReplay) {
  auto l = policy::Learner::create(policy::actor_spec(50), policy::critic_spec(50), 3);
  auto net = std::make_shared<const policy::Network>(l.actor_net);
  auto params = std::make_shared<const policy::ParameterBlock>(l.actor);
  PolicyController ctl(net, params, "ppo:test");
  std::stringstream log;
  run_episode(ctl, small_config(), 4, &log);
  std::stringstream copy(log.str());
  EXPECT_TRUE(replay_log(copy).identical);
}

TEST(Replay, DetectsTampering) {
  std::stringstream log;
  RuleController ctl;
  run_episode(ctl, small_config(), 9, &log);
  std::vector<std::string> lines;
  for (std::string l; std::getline(log, l);) lines.push_back(l);
  ASSERT_GT(lines.size(), 4u);
  auto rec = nlohmann::json::parse(lines[3]);
  rec["cmd"]["a"] = rec["cmd"]["a"].get<double>() + 1e-12;
  lines[3] = rec.dump();
  std::stringstream bad;
  for (const auto& l : lines) bad << l << '\n';
  const auto rep = replay_log(bad);
  EXPECT_FALSE(rep.identical);
  EXPECT_EQ(rep.steps, 3);
}

TEST(Replay, RejectsForeignFiles) {
  std::stringstream empty;
  EXPECT_THROW(replay_log(empty), LogError);
  std::stringstream other("{\"format\":\"something-else\"}\n");
  EXPECT_THROW(replay_log(other), LogError);
}

TEST(Render, FramesPerStep) {
  const auto dir = scratch("render");
  std::ofstream(dir / "log.jsonl") << [] {
    std::stringstream log;
    auto ctl = always_brake()();
    auto cfg = small_config();
    cfg.timeout = 2.0;
    run_episode(*ctl, cfg, 1, &log);
    return log.str();
  }();
  const auto rep = render_episode(dir / "log.jsonl", dir / "frames");
  EXPECT_EQ(rep.frames, 11);
  EXPECT_EQ(rep.skipped, 0);
  EXPECT_TRUE(fs::exists(dir / "frames" / "frame_00000.svg"));
  EXPECT_TRUE(fs::exists(dir / "frames" / "frame_00010.svg"));
  EXPECT_FALSE(fs::exists(dir / "frames" / "frame_00011.svg"));
  std::ifstream f(dir / "frames" / "frame_00000.svg");
  const std::string svg((std::istreambuf_iterator<char>(f)), {});
  EXPECT_NE(svg.find(kEgoColour), std::string::npos);
  EXPECT_NE(svg.find("fill=\"black\""), std::string::npos);
}

TEST(Render, EmptyLogAndMalformedLines) {
  const auto dir = scratch("render_bad");
  std::stringstream log;
  auto ctl = always_brake()();
  auto cfg = small_config();
  cfg.timeout = 0.4;
  run_episode(*ctl, cfg, 1, &log);
  std::vector<std::string> lines;
  for (std::string l; std::getline(log, l);) lines.push_back(l);
  std::ofstream(dir / "header_only.jsonl") << lines.front() << '\n';
  EXPECT_EQ(render_episode(dir / "header_only.jsonl", dir / "f0").frames, 0);

  std::ofstream bad(dir / "bad.jsonl");
  bad << lines[0] << '\n' << lines[1] << '\n' << "{not json\n" << "{\"k\":3}\n" << lines[2] << '\n';
  bad.close();
  const auto rep = render_episode(dir / "bad.jsonl", dir / "f1");
  EXPECT_EQ(rep.frames, 2);
  EXPECT_EQ(rep.skipped, 2);
  EXPECT_EQ(rep.warnings.size(), 2u);
}

TEST(Render, CooperationRampEndpoints) {
  EXPECT_EQ(hex_colour(cooperation_colour(1.0)), "#00aa00");
  EXPECT_EQ(hex_colour(cooperation_colour(0.0)), "#c8c8c8");
  EXPECT_EQ(cooperation_colour(2.0), cooperation_colour(1.0));
}

TEST(Heatmap, SingleCellMatchesEvaluate) {
  auto cfg = small_config();
  auto f = [] { return std::make_unique<RuleController>(); };
  const auto g = sweep_heatmap(f, {10}, {1.0}, cfg, 3, 100);
  cfg.gap_min = cfg.gap_max = 1.0;
  const auto ev = evaluate(f, cfg, 3, 100);
  ASSERT_EQ(g.success.size(), 1u);
  ASSERT_TRUE(g.success[0][0]);
  EXPECT_EQ(*g.success[0][0], ev.summary.success_rate);
}

TEST(Heatmap, InfeasibleCellsAreNaAndCsvRoundTrips) {
  auto cfg = small_config();
  cfg.road_length = 200.0;
  cfg.deadend_min = cfg.deadend_max = 20.0;
  cfg.timeout = 2.0;
  const auto g = sweep_heatmap(always_brake(), {5, 40}, {0.5, 3.0}, cfg, 2, 1);
  EXPECT_TRUE(g.success[0][0]);
  EXPECT_FALSE(g.success[1][1]);
  const auto dir = scratch("heatmap");
  write_heatmap_csv(dir / "grid.csv", g);
  write_heatmap_svg(dir / "grid.svg", g);
  const auto back = read_heatmap_csv(dir / "grid.csv");
  EXPECT_EQ(back.n_vehicles, g.n_vehicles);
  EXPECT_EQ(back.gaps, g.gaps);
  EXPECT_EQ(back.success, g.success);
  EXPECT_TRUE(fs::exists(dir / "grid.svg"));
}

TEST(Controllers, Parsing) {
  auto f = parse_controller("mpc:3l,0.25,cv");
  auto c = f();
  auto* m = dynamic_cast<MpcController*>(c.get());
  ASSERT_NE(m, nullptr);
  EXPECT_EQ(m->params().s_offset, 12.0);
  EXPECT_EQ(m->params().c_f, 0.25);
  EXPECT_EQ(m->params().c_m, mpc::ObstacleModel::ConstantVelocity);
  EXPECT_EQ(dynamic_cast<MpcController*>(parse_controller("mpc:8,0,static")().get())
                ->params().c_m,
            mpc::ObstacleModel::Static);
  EXPECT_EQ(parse_controller("rule")()->name(), "rule");
  EXPECT_THROW(parse_controller("mpc:3l,2,cv"), ControllerSpecError);
  EXPECT_THROW(parse_controller("mpc:3x,0.1,cv"), ControllerSpecError);
  EXPECT_THROW(parse_controller("mpc:3l,0.1"), ControllerSpecError);
  EXPECT_THROW(parse_controller("joystick"), ControllerSpecError);
  EXPECT_THROW(parse_controller("ppo:/nonexistent/ckpt.bin"), policy::CheckpointError);
}

TEST(Controllers, PolicyUsesBetaMeans) {
  auto l = policy::Learner::create(policy::actor_spec(50), policy::critic_spec(50), 3);
  auto net = std::make_shared<const policy::Network>(l.actor_net);
  auto params = std::make_shared<const policy::ParameterBlock>(l.actor);
  PolicyController ctl(net, params, "ppo:test");
  const auto s = env::sample_scenario(small_config(), 3);
  const auto obs = env::encode_observation(s);
  const auto cmd = ctl.act(s, obs);
  const auto out = net->forward(*params, policy::make_inputs(obs));
  EXPECT_EQ(cmd.kind, Command::Kind::Action);
  EXPECT_EQ(cmd.action, policy::mean_action(policy::to_beta_pair(out, 0)).action);
}
