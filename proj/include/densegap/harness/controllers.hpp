#pragma once

// Ego controllers the harness can drive an episode with.

#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "densegap/drivers.hpp"
#include "densegap/env/environment.hpp"
#include "densegap/mpc.hpp"
#include "densegap/policy/beta.hpp"
#include "densegap/policy/checkpoint.hpp"
#include "densegap/policy/network.hpp"

namespace densegap::harness {

/// Either a jerk / steering-rate action or a direct (a, delta) command.
struct Command {
  enum class Kind { Action, Control };
  Kind kind = Kind::Action;
  env::EgoAction action;
  sim::ControlInput control;

  static Command of(const env::EgoAction& a) { return {Kind::Action, a, {}}; }
  static Command of(const sim::ControlInput& c) { return {Kind::Control, {}, c}; }

  bool operator==(const Command&) const = default;
};

inline env::StepResult apply(env::SimState& sim, const Command& c) {
  return c.kind == Command::Kind::Action ? env::step(sim, c.action)
                                         : env::step_control(sim, c.control);
}

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual void reset(const env::SimState&, std::uint64_t /*seed*/) {}
  virtual Command act(const env::SimState& sim, const env::Observation& obs) = 0;
};

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

// ---------------------------------------------------------------------------

/// Deterministic policy: the mean of each Beta head.
class PolicyController final : public Controller {
 public:
  PolicyController(std::shared_ptr<const policy::Network> net,
                   std::shared_ptr<const policy::ParameterBlock> params, std::string label)
      : net_(std::move(net)), params_(std::move(params)), label_(std::move(label)) {
    net_->check(*params_);
  }

  std::string name() const override { return label_; }

  Command act(const env::SimState&, const env::Observation& obs) override {
    const auto out = net_->forward(*params_, policy::make_inputs(obs));
    return Command::of(policy::mean_action(policy::to_beta_pair(out, 0)).action);
  }

 private:
  std::shared_ptr<const policy::Network> net_;
  std::shared_ptr<const policy::ParameterBlock> params_;
  std::string label_;
};

class MpcController final : public Controller {
 public:
  explicit MpcController(mpc::MpcParams p) : p_(p) { mpc::validate(p_); }

  std::string name() const override {
    return "mpc:" + env::detail::format_double(p_.s_offset) + "," +
           env::detail::format_double(p_.c_f) + "," + mpc::to_string(p_.c_m);
  }

  Command act(const env::SimState& sim, const env::Observation&) override {
    return Command::of(mpc::mpc_step(sim, p_).control);
  }

  const mpc::MpcParams& params() const { return p_; }

 private:
  mpc::MpcParams p_;
};

/// The ego driven like the surrounding traffic (IDM + MOBIL), with an
/// incentive bonus toward the target lane and no random changes.
class RuleController final : public Controller {
 public:
  explicit RuleController(double lane_bias = 1.0) : lane_bias_(lane_bias) {}

  std::string name() const override { return "rule"; }

  void reset(const env::SimState& sim, std::uint64_t seed) override {
    rng_.seed(seed ^ 0x52554c45ull);
    tracked_lane_ = sim.ego().lane;
  }

  Command act(const env::SimState& sim, const env::Observation&) override {
    drivers::World w = sim.world;
    auto& me = w.vehicles.front();
    me.profile.idm.v0 = sim.ego_v_des;
    me.profile.stop_and_go = false;
    me.profile.p_c = 0.0;
    me.profile.mobil.p_random = 0.0;
    me.profile.mobil.preferred_lane = sim.target_lane;
    me.profile.mobil.lane_bias = lane_bias_;
    me.target_lane = tracked_lane_;
    const auto cmd = drivers::driver_control(w, 0, sim.time(), rng_);
    tracked_lane_ = cmd.target_lane;
    return Command::of(cmd.control);
  }

 private:
  double lane_bias_;
  std::mt19937_64 rng_;
  int tracked_lane_ = 0;
};

/// Plays back a fixed command list, then repeats `tail` forever.
class ScriptedController final : public Controller {
 public:
  ScriptedController(std::vector<Command> script, Command tail, std::string label = "scripted")
      : script_(std::move(script)), tail_(tail), label_(std::move(label)) {}

  std::string name() const override { return label_; }
  void reset(const env::SimState&, std::uint64_t) override { k_ = 0; }

  Command act(const env::SimState&, const env::Observation&) override {
    return k_ < script_.size() ? script_[k_++] : tail_;
  }

 private:
  std::vector<Command> script_;
  Command tail_;
  std::string label_;
  std::size_t k_ = 0;
};

inline ControllerFactory always_brake() {
  return [] {
    return std::make_unique<ScriptedController>(
        std::vector<Command>{}, Command::of(env::EgoAction{env::kJerkMin, 0.0}), "brake");
  };
}

// ---------------------------------------------------------------------------
// Parsing "ppo:CKPT", "mpc:S,CF,CM", "rule", "brake"

class ControllerSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// S is metres, or a multiple of the vehicle length with an "l" suffix
/// ("3l" = 12 m).
inline double parse_offset(const std::string& s) {
  if (s.empty()) throw ControllerSpecError("empty target offset");
  try {
    std::size_t used = 0;
    if (s.back() == 'l') {
      const double k = std::stod(s.substr(0, s.size() - 1), &used);
      if (used + 1 != s.size()) throw ControllerSpecError("bad offset '" + s + "'");
      return k * sim::VehicleShape{}.length;
    }
    const double m = std::stod(s, &used);
    if (used != s.size()) throw ControllerSpecError("bad offset '" + s + "'");
    return m;
  } catch (const std::logic_error&) {
    throw ControllerSpecError("bad offset '" + s + "'");
  }
}

inline mpc::MpcParams parse_mpc_params(const std::string& body) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    if (i == body.size() || body[i] == ',') {
      parts.push_back(body.substr(start, i - start));
      start = i + 1;
    }
  }
  if (parts.size() != 3) throw ControllerSpecError("mpc expects S,CF,CM");
  mpc::MpcParams p;
  p.s_offset = parse_offset(parts[0]);
  try {
    std::size_t used = 0;
    p.c_f = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("trailing");
    p.c_m = mpc::parse_obstacle_model(parts[2]);
  } catch (const std::logic_error& e) {
    throw ControllerSpecError(std::string("bad mpc parameters: ") + e.what());
  }
  try {
    mpc::validate(p);
  } catch (const std::invalid_argument& e) {
    throw ControllerSpecError(e.what());
  }
  return p;
}

/// Loads checkpoints eagerly so a bad file is reported before any episode.
inline ControllerFactory parse_controller(const std::string& spec) {
  if (spec == "rule") return [] { return std::make_unique<RuleController>(); };
  if (spec == "brake") return always_brake();
  if (spec.rfind("mpc:", 0) == 0) {
    const auto p = parse_mpc_params(spec.substr(4));
    return [p] { return std::make_unique<MpcController>(p); };
  }
  if (spec.rfind("ppo:", 0) == 0) {
    const auto ckpt = policy::load_checkpoint(spec.substr(4));
    auto net = std::make_shared<const policy::Network>(ckpt.actor.spec);
    auto params = std::make_shared<const policy::ParameterBlock>(ckpt.actor);
    return [net, params, spec] { return std::make_unique<PolicyController>(net, params, spec); };
  }
  throw ControllerSpecError("unknown controller '" + spec + "'");
}

}  // namespace densegap::harness
