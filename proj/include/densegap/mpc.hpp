#pragma once

// Sampling-free MPC baseline: plan a 6 s trajectory toward a target state in
// the desired lane by direct shooting, collision-check a leading fraction of
// it against predicted obstacles, then take its first step or brake fully.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "densegap/drivers.hpp"
#include "densegap/env/environment.hpp"
#include "densegap/sim_core.hpp"

namespace densegap::mpc {

enum class ObstacleModel { Static, ConstantVelocity };

inline const char* to_string(ObstacleModel m) {
  return m == ObstacleModel::Static ? "static" : "constant_velocity";
}

inline ObstacleModel parse_obstacle_model(const std::string& s) {
  if (s == "static") return ObstacleModel::Static;
  if (s == "constant_velocity" || s == "cv") return ObstacleModel::ConstantVelocity;
  throw std::invalid_argument("unknown obstacle model '" + s + "'");
}

inline constexpr int kHorizonSteps = 30;  // 6 s at 0.2 s
inline constexpr int kSegments = 3;
inline constexpr int kStepsPerSegment = kHorizonSteps / kSegments;
inline constexpr double kPlanDt = 0.2;

struct ObjectiveWeights {
  double x = 1.0, y = 1.0, psi = 10.0, v = 0.5;
};

struct MpcParams {
  double s_offset = 12.0;  // m; the paper's grid is 1..5 vehicle lengths
  double c_f = 0.25;       // checked fraction of the horizon
  ObstacleModel c_m = ObstacleModel::ConstantVelocity;
  ObjectiveWeights weights;
  int max_iterations = 80;  // Nelder-Mead iterations per start
};

inline void validate(const MpcParams& p) {
  if (!(p.s_offset > 0.0)) throw std::invalid_argument("s_offset must be positive");
  if (!(p.c_f >= 0.0 && p.c_f <= 1.0)) throw std::invalid_argument("c_f must be in [0, 1]");
  if (p.max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
}

struct Trajectory {
  std::vector<sim::VehicleState> states;    // kHorizonSteps + 1
  std::vector<sim::ControlInput> controls;  // kHorizonSteps
  double objective = std::numeric_limits<double>::infinity();
  bool converged = false;
};

using Controls = std::array<double, 2 * kSegments>;  // (a, delta) per segment

/// Last trajectory index inspected by the collision check.
inline int checked_index(double c_f) {
  return static_cast<int>(std::ceil(c_f * kHorizonSteps - 1e-9));
}

// ---------------------------------------------------------------------------
// Target

/// Target state in the desired lane, s_offset ahead of the ego. While the ego
/// has not yet reached the desired lane the target may not lie past the
/// deadend obstacle: it is clamped to deadend_s - length.
inline sim::VehicleState target_state(const env::SimState& sim, const MpcParams& p) {
  const auto& e = sim.ego();
  sim::VehicleState t;
  t.x = e.state.x + p.s_offset;
  if (!env::in_target_lane(sim)) t.x = std::min(t.x, sim.world.road.deadend_s - e.shape.length);
  t.y = sim::lane_centerline(sim.world.road, sim.target_lane);
  t.psi = 0.0;
  t.v = sim.ego_v_des;
  return t;
}

// ---------------------------------------------------------------------------
// Shooting

inline double final_state_cost(const sim::VehicleState& s, const sim::VehicleState& target,
                               const ObjectiveWeights& w) {
  const double dx = s.x - target.x, dy = s.y - target.y;
  const double dpsi = sim::normalize_angle(s.psi - target.psi), dv = s.v - target.v;
  return w.x * dx * dx + w.y * dy * dy + w.psi * dpsi * dpsi + w.v * dv * dv;
}

inline Trajectory rollout(const sim::VehicleState& ego, const Controls& u,
                          const sim::VehicleShape& shape) {
  Trajectory t;
  t.states.reserve(kHorizonSteps + 1);
  t.controls.reserve(kHorizonSteps);
  sim::VehicleState s = ego;
  t.states.push_back(s);
  for (int k = 0; k < kHorizonSteps; ++k) {
    const int seg = k / kStepsPerSegment;
    const sim::ControlInput c{std::clamp(u[2 * seg], sim::kAccelMin, sim::kAccelMax),
                              std::clamp(u[2 * seg + 1], -sim::kDeltaMax, sim::kDeltaMax)};
    s = sim::integrate_bicycle(s, c, shape, kPlanDt);
    t.controls.push_back(c);
    t.states.push_back(s);
  }
  return t;
}

/// The eight deterministic starting points: coasting, braking, accelerating,
/// and lane-change shaped steering profiles toward the target's side.
inline std::vector<Controls> start_points(const sim::VehicleState& ego,
                                          const sim::VehicleState& target) {
  const double side = target.y >= ego.y ? 1.0 : -1.0;
  const double a_match = std::clamp((target.v - ego.v) / 6.0, sim::kAccelMin, sim::kAccelMax);
  return {
      Controls{0, 0, 0, 0, 0, 0},
      Controls{a_match, 0.1 * side, a_match, -0.1 * side, a_match, 0},
      Controls{sim::kAccelMin, 0, sim::kAccelMin, 0, sim::kAccelMin, 0},
      Controls{1.0, 0, 1.0, 0, 0, 0},
      Controls{0, 0.2 * side, 0, -0.2 * side, 0, 0},
      Controls{a_match, 0.05 * side, a_match, 0, a_match, -0.05 * side},
      Controls{1.0, 0.3 * side, 0, -0.3 * side, 0, 0},
      Controls{-1.0, 0.15 * side, 0, -0.15 * side, 0, 0},
  };
}

namespace detail {

struct NelderMeadResult {
  Controls x{};
  double f = std::numeric_limits<double>::infinity();
  bool converged = false;
};

template <typename F>
NelderMeadResult nelder_mead(F f, const Controls& x0, const Controls& step, int max_iter,
                             double f_tol = 1e-10) {
  constexpr int n = 2 * kSegments;
  std::array<Controls, n + 1> pts;
  std::array<double, n + 1> val;
  pts[0] = x0;
  val[0] = f(x0);
  for (int i = 0; i < n; ++i) {
    pts[i + 1] = x0;
    pts[i + 1][i] += step[i];
    val[i + 1] = f(pts[i + 1]);
  }
  std::array<int, n + 1> order;
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int best = order[0], worst = order[n], second = order[n - 1];
    if (val[worst] - val[best] <= f_tol * (1.0 + std::abs(val[best]))) {
      converged = true;
      break;
    }
    Controls centroid{};
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < n; ++d) centroid[d] += pts[order[i]][d] / n;
    auto along = [&](double t) {
      Controls x;
      for (int d = 0; d < n; ++d) x[d] = centroid[d] + t * (pts[worst][d] - centroid[d]);
      return x;
    };
    const Controls xr = along(-1.0);
    const double fr = f(xr);
    if (fr < val[best]) {
      const Controls xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) { pts[worst] = xe; val[worst] = fe; }
      else { pts[worst] = xr; val[worst] = fr; }
    } else if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
    } else {
      const Controls xc = fr < val[worst] ? along(-0.5) : along(0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, val[worst])) {
        pts[worst] = xc;
        val[worst] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          const int k = order[i];
          for (int d = 0; d < n; ++d) pts[k][d] = pts[best][d] + 0.5 * (pts[k][d] - pts[best][d]);
          val[k] = f(pts[k]);
        }
      }
    }
  }
  NelderMeadResult r;
  const int best = static_cast<int>(std::min_element(val.begin(), val.end()) - val.begin());
  r.x = pts[best];
  r.f = val[best];
  r.converged = converged;
  return r;
}

inline Controls clamp_controls(Controls u) {
  for (int s = 0; s < kSegments; ++s) {
    u[2 * s] = std::clamp(u[2 * s], sim::kAccelMin, sim::kAccelMax);
    u[2 * s + 1] = std::clamp(u[2 * s + 1], -sim::kDeltaMax, sim::kDeltaMax);
  }
  return u;
}

}  // namespace detail

/// Minimises the weighted squared distance of the final state to `target`
/// over piecewise-constant (a, delta) on three 2 s segments, running
/// Nelder-Mead from each start point and keeping the best rollout.
inline Trajectory plan_trajectory(const sim::VehicleState& ego, const sim::VehicleState& target,
                                  const sim::VehicleShape& shape,
                                  const ObjectiveWeights& w = {}, int max_iterations = 80) {
  auto cost = [&](const Controls& u) {
    sim::VehicleState s = ego;
    for (int k = 0; k < kHorizonSteps; ++k) {
      const int seg = k / kStepsPerSegment;
      s = sim::integrate_bicycle(
          s, {std::clamp(u[2 * seg], sim::kAccelMin, sim::kAccelMax),
              std::clamp(u[2 * seg + 1], -sim::kDeltaMax, sim::kDeltaMax)},
          shape, kPlanDt);
    }
    return final_state_cost(s, target, w);
  };
  const Controls step{1.0, 0.1, 1.0, 0.1, 1.0, 0.1};
  Controls best_u{};
  double best_f = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (const Controls& start : start_points(ego, target)) {
    const auto r = detail::nelder_mead(cost, start, step, max_iterations);
    if (r.f < best_f) {
      best_f = r.f;
      best_u = detail::clamp_controls(r.x);
      converged = r.converged;
    }
  }
  Trajectory t = rollout(ego, best_u, shape);
  t.objective = final_state_cost(t.states.back(), target, w);
  t.converged = converged;
  return t;
}

// ---------------------------------------------------------------------------
// Collision check

/// Obstacle pose after k steps under the chosen prediction model.
inline std::vector<std::vector<sim::VehicleState>> predict_obstacles(
    const std::vector<drivers::Vehicle>& others, ObstacleModel model, int steps) {
  std::vector<std::vector<sim::VehicleState>> out(others.size());
  for (std::size_t i = 0; i < others.size(); ++i) {
    auto& seq = out[i];
    seq.reserve(static_cast<std::size_t>(steps) + 1);
    sim::VehicleState s = others[i].state;
    seq.push_back(s);
    for (int k = 0; k < steps; ++k) {
      if (model == ObstacleModel::ConstantVelocity)
        s = sim::integrate_bicycle(s, {0.0, s.delta}, others[i].shape, kPlanDt);
      seq.push_back(s);
    }
  }
  return out;
}

/// True if no checked trajectory state overlaps any predicted obstacle.
/// States 0 .. ceil(c_f * 30) are checked.
inline bool collision_fraction_check(const Trajectory& traj, const sim::VehicleShape& ego_shape,
                                     const std::vector<drivers::Vehicle>& others,
                                     double c_f, ObstacleModel model) {
  const int last = std::min(checked_index(c_f), static_cast<int>(traj.states.size()) - 1);
  const auto predicted = predict_obstacles(others, model, last);
  for (int k = 0; k <= last; ++k) {
    const auto& s = traj.states[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < others.size(); ++i) {
      const auto& o = predicted[i][static_cast<std::size_t>(k)];
      if (sim::separation_lower_bound(s, ego_shape, o, others[i].shape) > 0.0) continue;
      if (sim::obb_overlap(s, ego_shape, o, others[i].shape)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Controller

struct MpcDecision {
  sim::ControlInput control;
  bool clear = false;
  Trajectory trajectory;
};

inline std::vector<drivers::Vehicle> others_of(const env::SimState& sim) {
  return {sim.world.vehicles.begin() + 1, sim.world.vehicles.end()};
}

/// Plans, checks, and returns the first planned control if the checked part
/// is clear; otherwise full braking while steering to the current lane.
inline MpcDecision mpc_step(const env::SimState& sim, const MpcParams& p) {
  validate(p);
  const auto& ego = sim.ego();
  MpcDecision d;
  d.trajectory = plan_trajectory(ego.state, target_state(sim, p), ego.shape, p.weights,
                                 p.max_iterations);
  d.clear = collision_fraction_check(d.trajectory, ego.shape, others_of(sim), p.c_f, p.c_m);
  if (d.clear) {
    d.control = d.trajectory.controls.front();
  } else {
    const int lane = sim::nearest_lane(sim.world.road, ego.state.y);
    d.control = {sim::kAccelMin, drivers::pursue_lane(sim.world.road, ego.state, ego.shape, lane)};
  }
  return d;
}

}  // namespace densegap::mpc
