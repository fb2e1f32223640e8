#pragma once

// The dense-traffic lane-change environment: scenario generation,
// observation encoding, reward, ego action integration and termination.
//
// The ego is vehicles[0] of the world. It starts in lane 0 (the rightmost
// lane), which ends at a deadend ahead of it; the target lane is lane 1,
// immediately to its left.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "densegap/drivers.hpp"
#include "densegap/env/config.hpp"
#include "densegap/sim_core.hpp"

namespace densegap::env {

using Rng = drivers::Rng;

inline constexpr double kJerkMin = -4.0, kJerkMax = 2.0;         // m/s^3
inline constexpr double kSteerRateMin = -0.4, kSteerRateMax = 0.4; // rad/s
inline constexpr int kGridChannels = 4;
inline constexpr int kGridRows = 3;
inline constexpr int kEgoFeatures = 9;

struct EgoAction {
  double jerk = 0.0;
  double steer_rate = 0.0;

  bool operator==(const EgoAction&) const = default;
};

inline EgoAction clamp_action(const EgoAction& a) {
  return {std::clamp(a.jerk, kJerkMin, kJerkMax),
          std::clamp(a.steer_rate, kSteerRateMin, kSteerRateMax)};
}

enum class Outcome { Running, Success, Collision, DeadendOverrun, OffRoad, Timeout };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Running: return "Running";
    case Outcome::Success: return "Success";
    case Outcome::Collision: return "Collision";
    case Outcome::DeadendOverrun: return "DeadendOverrun";
    case Outcome::OffRoad: return "OffRoad";
    case Outcome::Timeout: return "Timeout";
  }
  return "Running";
}

inline Outcome parse_outcome(const std::string& s) {
  for (Outcome o : {Outcome::Running, Outcome::Success, Outcome::Collision,
                    Outcome::DeadendOverrun, Outcome::OffRoad, Outcome::Timeout}) {
    if (s == to_string(o)) return o;
  }
  throw std::invalid_argument("unknown outcome '" + s + "'");
}

inline bool is_terminal(Outcome o) { return o != Outcome::Running; }

/// Grid tensor [channel][row][cell] flattened row-major, plus the ego
/// feature vector. Rows are (left, current, right) relative to the ego's
/// lane; cells are 1 m bins centred on the ego, cell fov being the ego's own.
struct Observation {
  int fov = 50;
  std::vector<double> grid;
  std::array<double, kEgoFeatures> ego{};

  int width() const { return 2 * fov + 1; }
  static int index(int fov, int channel, int row, int cell) {
    return (channel * kGridRows + row) * (2 * fov + 1) + cell;
  }
  double at(int channel, int row, int cell) const {
    return grid[index(fov, channel, row, cell)];
  }
  double& at(int channel, int row, int cell) {
    return grid[index(fov, channel, row, cell)];
  }
  bool operator==(const Observation&) const = default;
};

// Ego feature vector slots.
enum EgoFeature {
  kDeadendDistance = 0,
  kInLane,
  kLateralOffset,
  kRelativeHeading,
  kSpeed,
  kAccel,
  kSteer,
  kPrevJerk,
  kPrevSteerRate,
};

struct SimState {
  ScenarioConfig cfg;
  drivers::World world;  // vehicles[0] is the ego
  int start_lane = 0;
  int target_lane = 1;
  double ego_v_des = 3.5;
  double d_init = 20.0;
  double ego_start_x = 0.0;
  int step_index = 0;
  double dwell = 0.0;  // continuous time spent in the target lane, s
  std::optional<double> lane_entry_time;
  std::optional<double> success_time;
  Outcome outcome = Outcome::Running;
  EgoAction last_action;
  Rng rng;
  std::uint64_t seed = 0;
  bool occupancy_verified = false;

  bool operator==(const SimState&) const = default;

  double time() const { return step_index * cfg.dt; }
  const drivers::Vehicle& ego() const { return world.vehicles.front(); }
  drivers::Vehicle& ego() { return world.vehicles.front(); }
};

struct StepInfo {
  double time = 0.0;
  double min_separation = std::numeric_limits<double>::infinity();
  int emergencies = 0;
  bool in_lane = false;
  EgoAction applied_action;      // jerk / steer rate actually applied
  sim::ControlInput control;     // ego (a, delta) after the step
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  Outcome outcome = Outcome::Running;
  StepInfo info;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Geometry helpers

inline bool in_target_lane(const SimState& sim) {
  const auto lane = sim::lane_at(sim.world.road, sim.ego().state.y);
  return lane && *lane == sim.target_lane;
}

/// Distance from the ego's front bumper to the deadend, floored at zero.
inline double deadend_distance(const SimState& sim) {
  const auto& e = sim.ego();
  const double front = e.state.x + e.shape.length / 2.0 * std::cos(e.state.psi);
  return std::max(0.0, sim.world.road.deadend_s - front);
}

inline double ego_min_separation(const drivers::World& world) {
  const auto& ego = world.vehicles.front();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < world.vehicles.size(); ++i) {
    const auto& o = world.vehicles[i];
    if (sim::separation_lower_bound(ego.state, ego.shape, o.state, o.shape) >= best)
      continue;
    best = std::min(best, sim::min_separation(ego.state, ego.shape, o.state, o.shape));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Traffic

/// Advances every rule-based vehicle by one step. Commands are computed on
/// the snapshot first, then committed together. Vehicles listed in `skip`
/// (by index) are left untouched. Returns the number of emergency brakes.
inline int advance_traffic(drivers::World& world, double t, double dt, Rng& rng,
                           std::size_t skip_count) {
  std::vector<drivers::DriverCommand> cmds(world.vehicles.size());
  int emergencies = 0;
  for (std::size_t i = skip_count; i < world.vehicles.size(); ++i) {
    cmds[i] = drivers::driver_control(world, i, t, rng);
    emergencies += cmds[i].emergency ? 1 : 0;
  }
  for (std::size_t i = skip_count; i < world.vehicles.size(); ++i) {
    auto& v = world.vehicles[i];
    v.state = sim::integrate_bicycle(v.state, cmds[i].control, v.shape, dt);
    v.lane = sim::nearest_lane(world.road, v.state.y);
    v.target_lane = cmds[i].target_lane;
  }
  return emergencies;
}

// ---------------------------------------------------------------------------
// Scenario generation

namespace detail {

inline double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline drivers::BehaviourProfile sample_profile(const ScenarioConfig& cfg,
                                                Rng& rng) {
  drivers::BehaviourProfile b;
  b.idm.v0 = uniform(rng, cfg.v_des_min, cfg.v_des_max);
  b.mobil.politeness = uniform(rng, 0.2, 0.6);
  switch (cfg.driver_mix) {
    case DriverMix::Cooperative: b.p_c = uniform(rng, 0.75, 1.0); break;
    case DriverMix::Mixed: b.p_c = uniform(rng, 0.0, 1.0); break;
    case DriverMix::Aggressive: b.p_c = uniform(rng, 0.0, 0.25); break;
  }
  b.lambda_p = uniform(rng, cfg.lambda_p_min, cfg.lambda_p_max) * cfg.lambda_p_scale;
  b.sg_period = uniform(rng, 8.0, 16.0);
  b.sg_phase = uniform(rng, 0.0, b.sg_period);
  return b;
}

struct LanePlan {
  int lane = 0;
  int count = 0;
};

inline std::vector<LanePlan> lane_plan(const ScenarioConfig& cfg) {
  const int n = cfg.n_vehicles;
  if (cfg.lane_count == 2) {
    const int ego_lane = static_cast<int>(std::floor(0.3 * n));
    return {{0, ego_lane}, {1, n - ego_lane}};
  }
  const int ego_lane = static_cast<int>(std::floor(0.2 * n));
  const int far_lane = static_cast<int>(std::floor(0.3 * n));
  return {{0, ego_lane}, {1, n - ego_lane - far_lane}, {2, far_lane}};
}

inline double ego_start_x(const ScenarioConfig& cfg) { return 0.45 * cfg.road_length; }

// Space a lane block may occupy behind its head.
inline void check_packing(const ScenarioConfig& cfg) {
  const double length = sim::VehicleShape{}.length;
  const double x0 = ego_start_x(cfg);
  for (const auto& plan : lane_plan(cfg)) {
    if (plan.count == 0) continue;
    const double need = plan.count * length + (plan.count - 1) * cfg.gap_max;
    const double room = plan.lane == 0 ? x0 - length / 2.0 - cfg.gap_max : x0;
    if (need > room) {
      throw ScenarioError("cannot pack " + std::to_string(plan.count) +
                          " vehicles into lane " + std::to_string(plan.lane) +
                          " (needs " + std::to_string(need) + " m, has " +
                          std::to_string(room) + " m); lower n_vehicles or gaps");
    }
  }
}

struct Candidate {
  SimState sim;
  bool feasible = false;
};

inline Candidate build_candidate(const ScenarioConfig& cfg, std::uint64_t seed,
                                 int attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt), 0x5eedu};
  Rng rng(seq);
  const sim::VehicleShape shape{};
  const double x0 = ego_start_x(cfg);
  const double margin = 5.0;

  SimState s;
  s.cfg = cfg;
  s.seed = seed;
  s.start_lane = 0;
  s.target_lane = 1;
  s.ego_start_x = x0;
  s.world.road.lane_count = cfg.lane_count;
  s.world.road.lane_width = cfg.lane_width;
  s.world.road.road_length = cfg.road_length;
  s.world.deadend_lane = 0;
  s.world.deadend_length = shape.length;

  s.d_init = uniform(rng, cfg.deadend_min, cfg.deadend_max);
  s.world.road.deadend_s = x0 + shape.length / 2.0 + s.d_init;
  s.ego_v_des = uniform(rng, cfg.ego_v_des_min, cfg.ego_v_des_max);

  drivers::Vehicle ego;
  ego.id = 0;
  ego.shape = shape;
  ego.lane = ego.target_lane = 0;
  ego.state.x = x0;
  ego.state.y = sim::lane_centerline(s.world.road, 0);
  ego.profile.idm.v0 = s.ego_v_des;
  ego.profile.mobil.preferred_lane = s.target_lane;
  ego.profile.mobil.lane_bias = 1.0;
  ego.profile.p_c = 1.0;
  s.world.vehicles.push_back(ego);

  bool feasible = true;
  int next_id = 1;
  const bool relaxed = attempt >= 8;
  for (const auto& plan : lane_plan(cfg)) {
    if (plan.count == 0) continue;
    std::vector<drivers::Vehicle> lane_vehicles(plan.count);
    std::vector<double> gaps(plan.count);
    for (int k = 0; k < plan.count; ++k) {
      auto& v = lane_vehicles[k];
      v.id = next_id++;
      v.shape = shape;
      v.lane = v.target_lane = plan.lane;
      v.profile = sample_profile(cfg, rng);
      gaps[k] = uniform(rng, cfg.gap_min, cfg.gap_max);
    }
    double block = plan.count * shape.length;
    for (int k = 1; k < plan.count; ++k) block += gaps[k];

    // Front bumper of the block's head, relative to the ego center.
    double head = 0.0;
    if (plan.lane == 0) {
      head = -shape.length / 2.0 - gaps[0];
    } else if (plan.lane == s.target_lane) {
      // The tail must still be inside the ego's field of view at the
      // timeout if the platoon runs at its head's desired speed.
      const double u = lane_vehicles[0].profile.idm.v0;
      const double latest = cfg.fov - margin - cfg.timeout * u + block - shape.length / 2.0;
      const double lo = relaxed ? -cfg.fov + margin + shape.length
                                : shape.length / 2.0 + 1.0;
      const double hi = std::min(30.0, latest);
      if (hi < lo) {
        feasible = false;
        head = lo;
      } else {
        head = uniform(rng, lo, hi);
      }
    } else {
      head = uniform(rng, 0.0, 40.0);
    }

    double front = x0 + head;
    double lead_v = -1.0;
    for (int k = 0; k < plan.count; ++k) {
      auto& v = lane_vehicles[k];
      if (k > 0) front -= gaps[k];
      v.state.x = front - shape.length / 2.0;
      v.state.y = sim::lane_centerline(s.world.road, plan.lane);
      double speed = v.profile.idm.v0;
      if (k > 0) speed = std::min(drivers::equilibrium_speed(gaps[k], v.profile.idm), lead_v);
      v.state.v = speed;
      lead_v = speed;
      front -= shape.length;
      if (front < 0.0) feasible = false;
    }
    for (auto& v : lane_vehicles) s.world.vehicles.push_back(std::move(v));
  }

  // Stop-and-go subset.
  const int n_other = static_cast<int>(s.world.vehicles.size()) - 1;
  const int n_sg = static_cast<int>(std::lround(cfg.stop_and_go_fraction * n_other));
  std::vector<int> order(n_other);
  std::iota(order.begin(), order.end(), 1);
  std::shuffle(order.begin(), order.end(), rng);
  for (int k = 0; k < n_sg; ++k) s.world.vehicles[order[k]].profile.stop_and_go = true;

  // Ego speed: match the nearest target-lane vehicle, bounded so the ego can
  // still stop short of the deadend under the jerk limit.
  auto& e = s.world.vehicles.front();
  double v_adj = s.ego_v_des;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < s.world.vehicles.size(); ++i) {
    const auto& o = s.world.vehicles[i];
    if (o.lane == s.target_lane && std::abs(o.state.x - x0) < best) {
      best = std::abs(o.state.x - x0);
      v_adj = o.state.v;
    }
  }
  const double v_stop = 0.5 * std::sqrt(8.0 * std::max(s.d_init - 2.0, 0.0));
  e.state.v = std::min({s.ego_v_des, v_adj, v_stop});
  for (std::size_t i = 1; i < s.world.vehicles.size(); ++i) {
    auto& o = s.world.vehicles[i];
    if (o.lane == 0) o.state.v = std::min(o.state.v, e.state.v);
  }

  s.rng = Rng(rng());
  return {std::move(s), feasible};
}

}  // namespace detail

/// True if, with the ego removed, the target lane keeps at least one vehicle
/// within the ego's longitudinal field of view (around its start position)
/// for the whole timeout window.
inline bool target_lane_stays_occupied(const SimState& sim) {
  drivers::World world = sim.world;
  world.vehicles.erase(world.vehicles.begin());
  Rng rng = sim.rng;
  const double fov = sim.cfg.fov;
  auto occupied = [&] {
    for (const auto& v : world.vehicles) {
      if (v.lane == sim.target_lane && std::abs(v.state.x - sim.ego_start_x) <= fov)
        return true;
    }
    return false;
  };
  if (!occupied()) return false;
  const int steps = static_cast<int>(std::ceil(sim.cfg.timeout / sim.cfg.dt - 1e-9));
  for (int k = 0; k < steps; ++k) {
    advance_traffic(world, k * sim.cfg.dt, sim.cfg.dt, rng, 0);
    if (!occupied()) return false;
  }
  return true;
}

/// Samples an initial scene. Deterministic in (cfg, seed).
///
/// With require_occupancy set, candidates are drawn until an ego-free rollout
/// confirms the target lane stays occupied near the ego through the timeout;
/// the first attempts insist on traffic alongside the ego, later ones allow
/// the platoon to start behind it. If no attempt qualifies (possible only for
/// very small n_vehicles) the last candidate is returned with
/// occupancy_verified = false.
inline SimState sample_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  detail::check_packing(cfg);
  constexpr int kAttempts = 64;
  std::optional<SimState> last;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    auto cand = detail::build_candidate(cfg, seed, attempt);
    if (!cfg.require_occupancy) {
      cand.sim.occupancy_verified = false;
      return std::move(cand.sim);
    }
    if (cand.feasible && target_lane_stays_occupied(cand.sim)) {
      cand.sim.occupancy_verified = true;
      return std::move(cand.sim);
    }
    last = std::move(cand.sim);
  }
  last->occupancy_verified = false;
  return std::move(*last);
}

// ---------------------------------------------------------------------------
// Observation

/// Cells [first, last] covered by a longitudinal extent [lo, hi] relative to
/// the ego, where cell c spans [c - fov - 0.5, c - fov + 0.5).
inline std::pair<int, int> covered_cells(double lo, double hi, int fov) {
  return {static_cast<int>(std::floor(lo + 0.5)) + fov,
          static_cast<int>(std::floor(hi + 0.5)) + fov};
}

inline Observation encode_observation(const SimState& sim) {
  const auto& cfg = sim.cfg;
  const auto& road = sim.world.road;
  const auto& ego = sim.ego();
  Observation obs;
  obs.fov = cfg.fov;
  const int width = obs.width();
  obs.grid.assign(kGridChannels * kGridRows * width, 0.0);

  const int ego_lane = sim::nearest_lane(road, ego.state.y);
  auto row_of = [&](int lane) { return 1 - (lane - ego_lane); };
  for (int row = 0; row < kGridRows; ++row) {
    const int lane = ego_lane + 1 - row;
    if (lane < 0 || lane >= road.lane_count) {
      for (int c = 0; c < width; ++c) obs.at(0, row, c) = 1.0;
    }
  }

  // Rasterise back to front so the front-most vehicle wins shared cells.
  std::vector<std::size_t> order;
  for (std::size_t i = 1; i < sim.world.vehicles.size(); ++i) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sim.world.vehicles[a].state.x < sim.world.vehicles[b].state.x;
  });
  for (std::size_t i : order) {
    const auto& o = sim.world.vehicles[i];
    const int lane = sim::nearest_lane(road, o.state.y);
    const int row = row_of(lane);
    if (row < 0 || row >= kGridRows) continue;
    auto [lo, hi] = sim::longitudinal_extent(o.state, o.shape);
    auto [first, last] = covered_cells(lo - ego.state.x, hi - ego.state.x, cfg.fov);
    first = std::max(first, 0);
    last = std::min(last, width - 1);
    const double dv = (o.state.v - ego.state.v) / cfg.scales.v_norm;
    const double dt = (o.state.y - sim::lane_centerline(road, lane)) / road.lane_width;
    const double dpsi = sim::normalize_angle(o.state.psi - ego.state.psi) / cfg.scales.psi_norm;
    for (int c = first; c <= last; ++c) {
      obs.at(0, row, c) = 1.0;
      obs.at(1, row, c) = dv;
      obs.at(2, row, c) = dt;
      obs.at(3, row, c) = dpsi;
    }
  }

  const auto pose = sim::frenet_of(road, ego.state, sim.target_lane);
  obs.ego[kDeadendDistance] = deadend_distance(sim) / cfg.fov;
  obs.ego[kInLane] = in_target_lane(sim) ? 1.0 : 0.0;
  obs.ego[kLateralOffset] = pose.t / road.lane_width;
  obs.ego[kRelativeHeading] = pose.phi / cfg.scales.psi_norm;
  obs.ego[kSpeed] = ego.state.v / cfg.scales.v_norm;
  obs.ego[kAccel] = ego.state.a / cfg.scales.a_norm;
  obs.ego[kSteer] = ego.state.delta / cfg.scales.delta_norm;
  obs.ego[kPrevJerk] = sim.last_action.jerk / cfg.scales.jerk_norm;
  obs.ego[kPrevSteerRate] = sim.last_action.steer_rate / cfg.scales.sr_norm;
  return obs;
}

// ---------------------------------------------------------------------------
// Reward

/// Deadend term: zero once in the target lane, otherwise a linear ramp from
/// 0 at the initial deadend distance down to -lambda_d at the deadend.
inline double f_deadend(double d, bool in_lane, double d_init,
                        const RewardWeights& w) {
  if (in_lane) return 0.0;
  const double ramp = std::clamp(1.0 - d / d_init, 0.0, 1.0);
  return -w.lambda_d * ramp;
}

inline double reward(const SimState& sim, const EgoAction& action,
                     const RewardWeights& w) {
  const auto& e = sim.ego().state;
  const auto pose = sim::frenet_of(sim.world.road, e, sim.target_lane);
  const bool in_lane = in_target_lane(sim);
  const double lane = in_lane ? 1.0 : 0.0;
  double r = 0.0;
  r -= w.lambda_v * std::abs(e.v - sim.ego_v_des);
  r -= w.lambda_t * std::abs(pose.t);
  r -= w.lambda_phi * std::abs(pose.phi) * lane;
  r -= w.lambda_j * std::abs(action.jerk);
  r -= w.lambda_sr * std::abs(action.steer_rate);
  r += lane;
  r += f_deadend(deadend_distance(sim), in_lane, sim.d_init, w);
  return r;
}

// ---------------------------------------------------------------------------
// Termination

/// Failure checks in order (collision, deadend, off-road, timeout), then the
/// dwell-based success check.
inline Outcome terminate(const SimState& sim) {
  if (is_terminal(sim.outcome)) return sim.outcome;
  const auto& ego = sim.ego();
  for (std::size_t i = 1; i < sim.world.vehicles.size(); ++i) {
    const auto& o = sim.world.vehicles[i];
    if (sim::separation_lower_bound(ego.state, ego.shape, o.state, o.shape) > 0.0) continue;
    if (sim::obb_overlap(ego.state, ego.shape, o.state, o.shape)) return Outcome::Collision;
  }
  const double front = ego.state.x + ego.shape.length / 2.0 * std::cos(ego.state.psi);
  if (front > sim.world.road.deadend_s && !in_target_lane(sim)) return Outcome::DeadendOverrun;
  const auto [lo, hi] = sim::lateral_extent(ego.state, ego.shape);
  if (lo < 0.0 || hi > sim.world.road.width()) return Outcome::OffRoad;
  if (sim.time() > sim.cfg.timeout + 1e-9) return Outcome::Timeout;
  if (sim.lane_entry_time && sim.dwell >= sim.cfg.success_dwell - 1e-9) return Outcome::Success;
  return Outcome::Running;
}

// ---------------------------------------------------------------------------
// Step

namespace detail {

inline StepResult finish_step(SimState& sim, const sim::ControlInput& ego_control,
                              const EgoAction& applied) {
  const double dt = sim.cfg.dt;
  const double t = sim.time();
  StepResult out;
  out.info.emergencies = advance_traffic(sim.world, t, dt, sim.rng, 1);

  auto& ego = sim.ego();
  ego.state = sim::integrate_bicycle(ego.state, ego_control, ego.shape, dt);
  ego.lane = ego.target_lane = sim::nearest_lane(sim.world.road, ego.state.y);

  sim.step_index += 1;
  sim.last_action = applied;
  const bool in_lane = in_target_lane(sim);
  if (in_lane) {
    if (sim.dwell == 0.0) sim.lane_entry_time = t;
    sim.dwell += dt;
  } else {
    sim.dwell = 0.0;
    sim.lane_entry_time.reset();
  }

  sim.outcome = terminate(sim);
  if (sim.outcome == Outcome::Success) sim.success_time = sim.time();

  out.outcome = sim.outcome;
  out.reward = reward(sim, applied, sim.cfg.reward_weights);
  out.obs = encode_observation(sim);
  out.info.time = sim.time();
  out.info.min_separation = ego_min_separation(sim.world);
  out.info.in_lane = in_lane;
  out.info.applied_action = applied;
  out.info.control = {ego.state.a, ego.state.delta};
  return out;
}

}  // namespace detail

/// Applies a jerk / steering-rate action. Order: (1) the ego integrates the
/// action into its acceleration and steering angle, (2) every rule-based
/// driver decides on the pre-step snapshot, (3) all vehicles integrate one
/// bicycle step, (4) termination, (5) reward on the post-step state.
inline StepResult step(SimState& sim, const EgoAction& action) {
  if (is_terminal(sim.outcome)) {
    throw std::logic_error("step called on a terminated episode");
  }
  if (!std::isfinite(action.jerk) || !std::isfinite(action.steer_rate)) {
    throw std::invalid_argument("ego action must be finite");
  }
  const EgoAction a = clamp_action(action);
  const auto& e = sim.ego().state;
  const double dt = sim.cfg.dt;
  const sim::ControlInput ctrl{
      std::clamp(e.a + a.jerk * dt, sim::kAccelMin, sim::kAccelMax),
      std::clamp(e.delta + a.steer_rate * dt, -sim::kDeltaMax, sim::kDeltaMax)};
  return detail::finish_step(sim, ctrl, a);
}

/// Commands the ego's acceleration and steering angle directly (used by the
/// MPC and rule-based controllers). The reward charges the implied jerk and
/// steering rate.
inline StepResult step_control(SimState& sim, const sim::ControlInput& control) {
  if (is_terminal(sim.outcome)) {
    throw std::logic_error("step called on a terminated episode");
  }
  if (!std::isfinite(control.a_cmd) || !std::isfinite(control.delta_cmd)) {
    throw std::invalid_argument("ego control must be finite");
  }
  const auto& e = sim.ego().state;
  const double dt = sim.cfg.dt;
  const sim::ControlInput ctrl{std::clamp(control.a_cmd, sim::kAccelMin, sim::kAccelMax),
                               std::clamp(control.delta_cmd, -sim::kDeltaMax, sim::kDeltaMax)};
  const EgoAction implied{(ctrl.a_cmd - e.a) / dt, (ctrl.delta_cmd - e.delta) / dt};
  return detail::finish_step(sim, ctrl, implied);
}

// ---------------------------------------------------------------------------
// Environment interface used by the trainer

class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual StepResult step(const EgoAction& action) = 0;
  virtual int fov() const = 0;
};

class LaneChangeEnv final : public Environment {
 public:
  explicit LaneChangeEnv(ScenarioConfig cfg) : cfg_(std::move(cfg)) { validate(cfg_); }

  Observation reset(std::uint64_t seed) override {
    sim_ = sample_scenario(cfg_, seed);
    return encode_observation(sim_);
  }

  StepResult step(const EgoAction& action) override { return env::step(sim_, action); }

  StepResult step_control(const sim::ControlInput& control) {
    return env::step_control(sim_, control);
  }

  int fov() const override { return cfg_.fov; }
  const SimState& state() const { return sim_; }
  const ScenarioConfig& config() const { return cfg_; }

 private:
  ScenarioConfig cfg_;
  SimState sim_;
};

/// FNV-1a over the bit patterns of every vehicle state; used to verify
/// bit-exact replays.
inline std::uint64_t world_hash(const drivers::World& world) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (const auto& v : world.vehicles) {
    mix(v.state.x);
    mix(v.state.y);
    mix(v.state.psi);
    mix(v.state.v);
    mix(v.state.a);
    mix(v.state.delta);
    mix(static_cast<double>(v.target_lane));
  }
  return h;
}

}  // namespace densegap::env
