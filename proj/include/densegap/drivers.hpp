#pragma once

// Rule-based behaviour for every non-ego vehicle: IDM car following with an
// optional stop-and-go cycle, MOBIL lane changes with random safe changes,
// and per-timestep probabilistic yielding to vehicles that intrude into the
// driver's lateral field of view.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "densegap/sim_core.hpp"

namespace densegap::drivers {

using Rng = std::mt19937_64;

inline constexpr double kInfiniteGap = std::numeric_limits<double>::infinity();

struct IdmParams {
  double v0 = 3.5;       // desired velocity, m/s
  double T = 0.5;        // time headway, s
  double s0_min = 0.4;   // standstill gap, m
  double a_max = 2.0;    // m/s^2
  double b_comf = 2.0;   // m/s^2, positive

  bool operator==(const IdmParams&) const = default;
};

struct MobilParams {
  double politeness = 0.4;
  double a_threshold = 0.1;  // m/s^2
  double b_safe = 4.0;       // m/s^2, positive
  double p_random = 0.04;    // per decision step
  // Incentive bonus (m/s^2) for moving toward preferred_lane. Zero for
  // ordinary traffic; the rule-based ego uses it to want the target lane.
  double lane_bias = 0.0;
  int preferred_lane = -1;

  bool operator==(const MobilParams&) const = default;
};

struct BehaviourProfile {
  IdmParams idm;
  MobilParams mobil;
  double p_c = 0.5;        // cooperativeness
  double lambda_p = 0.0;   // lateral perception extension, m
  bool stop_and_go = false;
  double sg_period = 12.0;  // s
  double sg_phase = 0.0;    // s
  double lookahead = 30.0;  // cooperation scan range, m

  bool operator==(const BehaviourProfile&) const = default;
};

enum class LaneDecision { Left, Stay, Right };

struct Vehicle {
  int id = 0;
  sim::VehicleState state;
  sim::VehicleShape shape;
  BehaviourProfile profile;
  int lane = 0;         // lane containing the center
  int target_lane = 0;  // lane being tracked; differs from lane mid-change

  bool operator==(const Vehicle&) const = default;
};

/// Snapshot of the road. The deadend is a stationary obstacle occupying
/// [deadend_s, deadend_s + deadend_length] in deadend_lane; that lane is
/// closed to discretionary lane changes.
struct World {
  sim::RoadGeometry road;
  std::vector<Vehicle> vehicles;
  int deadend_lane = 0;
  double deadend_length = 4.0;
  bool deadend_active = true;

  bool operator==(const World&) const = default;
};

// ---------------------------------------------------------------------------
// Longitudinal model

/// Intelligent Driver Model acceleration clipped to the actuator range.
/// A non-positive gap is an emergency and returns the full-brake value.
inline double idm_acceleration(double v, double gap, double v_lead,
                               const IdmParams& p) {
  if (!(gap > 0.0)) return sim::kAccelMin;
  double free_term;
  if (p.v0 > 0.0) {
    const double ratio = v / p.v0;
    free_term = 1.0 - ratio * ratio * ratio * ratio;
  } else {
    // Desired speed zero: come to rest at the comfortable deceleration.
    free_term = v > 0.0 ? -p.b_comf / p.a_max : 0.0;
  }
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    const double dynamic =
        v * p.T + v * (v - v_lead) / (2.0 * std::sqrt(p.a_max * p.b_comf));
    const double s_star = p.s0_min + std::max(0.0, dynamic);
    interaction = (s_star / gap) * (s_star / gap);
  }
  const double a = p.a_max * (free_term - interaction);
  return std::clamp(a, sim::kAccelMin, sim::kAccelMax);
}

/// Desired speed under the stop-and-go cycle: nominal for the first half of
/// every period, zero for the second half.
inline double effective_v0(const BehaviourProfile& b, double t) {
  if (!b.stop_and_go) return b.idm.v0;
  const double phase = std::fmod(t + b.sg_phase, b.sg_period);
  return phase < b.sg_period / 2.0 ? b.idm.v0 : 0.0;
}

/// Speed at which a follower is in equilibrium behind a leader moving at the
/// same speed with the given bumper gap.
inline double equilibrium_speed(double gap, const IdmParams& p) {
  if (!(gap > p.s0_min)) return 0.0;
  double lo = 0.0, hi = p.v0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double s_star = p.s0_min + mid * p.T;
    const double r = mid / p.v0;
    const double a = 1.0 - r * r * r * r - (s_star / gap) * (s_star / gap);
    (a > 0.0 ? lo : hi) = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// World queries

/// Bumper-to-bumper longitudinal gap from `follower` to `leader` on the
/// straight road.
inline double bumper_gap(const Vehicle& follower, const Vehicle& leader) {
  return (leader.state.x - leader.shape.length / 2.0) -
         (follower.state.x + follower.shape.length / 2.0);
}

/// True if the vehicle should be treated as occupying `lane` for car
/// following: its center is there or it is steering into it.
inline bool occupies_lane(const Vehicle& v, int lane) {
  return v.lane == lane || v.target_lane == lane;
}

struct Neighbour {
  std::optional<std::size_t> index;  // nullopt for the deadend obstacle
  double gap = kInfiniteGap;
  double v = 0.0;
};

inline std::optional<Neighbour> find_leader(const World& world,
                                            std::size_t subject, int lane) {
  const Vehicle& me = world.vehicles[subject];
  std::optional<Neighbour> best;
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    if (i == subject) continue;
    const Vehicle& other = world.vehicles[i];
    if (!occupies_lane(other, lane) || other.state.x <= me.state.x) continue;
    const double gap = bumper_gap(me, other);
    if (!best || gap < best->gap) best = Neighbour{i, gap, other.state.v};
  }
  if (world.deadend_active && lane == world.deadend_lane) {
    const double dead_rear = world.road.deadend_s;
    if (dead_rear >= me.state.x) {
      const double gap = dead_rear - (me.state.x + me.shape.length / 2.0);
      if (!best || gap < best->gap) best = Neighbour{std::nullopt, gap, 0.0};
    }
  }
  return best;
}

inline std::optional<Neighbour> find_follower(const World& world,
                                              std::size_t subject, int lane) {
  const Vehicle& me = world.vehicles[subject];
  std::optional<Neighbour> best;
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    if (i == subject) continue;
    const Vehicle& other = world.vehicles[i];
    if (!occupies_lane(other, lane) || other.state.x > me.state.x) continue;
    const double gap = bumper_gap(other, me);
    if (!best || gap < best->gap) best = Neighbour{i, gap, other.state.v};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Cooperation

/// Picks the vehicle the subject yields to this timestep, if any.
///
/// Candidates are vehicles ahead within `lookahead` whose footprint reaches
/// into the subject's lateral field of view: its lane span widened by
/// lambda_p on each side. A footprint inside the subject's own width corridor
/// is yielded to unconditionally; any other candidate is yielded to with
/// probability p_c, drawn independently for each candidate every timestep.
/// Returns the nearest yielded-to vehicle.
inline std::optional<std::size_t> cooperation_check(const World& world,
                                                    std::size_t subject,
                                                    const BehaviourProfile& b,
                                                    Rng& rng) {
  const Vehicle& me = world.vehicles[subject];
  const double center = sim::lane_centerline(world.road, me.lane);
  const double fov_half = world.road.lane_width / 2.0 + b.lambda_p;
  const double body_half = me.shape.width / 2.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::optional<std::size_t> target;
  double target_gap = kInfiniteGap;
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    if (i == subject) continue;
    const Vehicle& other = world.vehicles[i];
    if (other.state.x <= me.state.x) continue;
    const double gap = bumper_gap(me, other);
    if (gap > b.lookahead) continue;
    const auto [lo, hi] = sim::lateral_extent(other.state, other.shape);
    const bool in_fov = hi > center - fov_half && lo < center + fov_half;
    if (!in_fov) continue;
    const bool in_body = hi > center - body_half && lo < center + body_half;
    bool yields = in_body;
    if (!yields) yields = unit(rng) < b.p_c;
    if (yields && gap < target_gap) {
      target = i;
      target_gap = gap;
    }
  }
  return target;
}

// ---------------------------------------------------------------------------
// Lane changes

struct FollowerView {
  double v = 0.0;
  IdmParams idm;                 // with the follower's effective v0
  double gap_to_subject = 0.0;   // follower front to subject rear
};

struct LaneView {
  bool exists = false;
  bool allowed = false;  // open to discretionary changes
  std::optional<Neighbour> leader;
  std::optional<FollowerView> follower;
};

struct MobilContext {
  double v = 0.0;
  double length = 4.0;
  IdmParams idm;  // with the subject's effective v0
  int lane = 0;
  LaneView current;
  LaneView left;
  LaneView right;
};

namespace detail {

inline double accel_behind(double v, const std::optional<Neighbour>& leader,
                           const IdmParams& p) {
  if (!leader) return idm_acceleration(v, kInfiniteGap, 0.0, p);
  return idm_acceleration(v, leader->gap, leader->v, p);
}

struct ChangeAssessment {
  bool safe = false;
  double incentive = 0.0;
};

inline ChangeAssessment assess(const MobilContext& ctx, const LaneView& target,
                               const MobilParams& p, int direction) {
  ChangeAssessment out;
  if (!target.exists || !target.allowed) return out;

  // Physical room in the target lane.
  if (target.leader && target.leader->gap <= 0.0) return out;
  if (target.follower && target.follower->gap_to_subject <= 0.0) return out;

  const double own_new = accel_behind(ctx.v, target.leader, ctx.idm);
  if (own_new < -p.b_safe) return out;

  double new_follower_gain = 0.0;
  if (target.follower) {
    const FollowerView& f = *target.follower;
    const double after =
        idm_acceleration(f.v, f.gap_to_subject, ctx.v, f.idm);
    if (after < -p.b_safe) return out;
    std::optional<Neighbour> before_leader;
    if (target.leader) {
      before_leader = Neighbour{target.leader->index,
                                f.gap_to_subject + ctx.length + target.leader->gap,
                                target.leader->v};
    }
    const double before = accel_behind(f.v, before_leader, f.idm);
    new_follower_gain = after - before;
  }
  out.safe = true;

  double old_follower_gain = 0.0;
  if (ctx.current.follower) {
    const FollowerView& o = *ctx.current.follower;
    const double before = idm_acceleration(o.v, o.gap_to_subject, ctx.v, o.idm);
    std::optional<Neighbour> after_leader;
    if (ctx.current.leader) {
      after_leader = Neighbour{ctx.current.leader->index,
                               o.gap_to_subject + ctx.length + ctx.current.leader->gap,
                               ctx.current.leader->v};
    }
    old_follower_gain = accel_behind(o.v, after_leader, o.idm) - before;
  }

  const double own_old = accel_behind(ctx.v, ctx.current.leader, ctx.idm);
  out.incentive = own_new - own_old +
                  p.politeness * (new_follower_gain + old_follower_gain);
  if (p.preferred_lane >= 0) {
    const int dest = ctx.lane + direction;
    if (std::abs(dest - p.preferred_lane) < std::abs(ctx.lane - p.preferred_lane))
      out.incentive += p.lane_bias;
    else if (std::abs(dest - p.preferred_lane) > std::abs(ctx.lane - p.preferred_lane))
      out.incentive -= p.lane_bias;
  }
  return out;
}

}  // namespace detail

/// MOBIL lane choice. A change needs the safety criterion (no overlap in the
/// target lane, and neither the subject nor the prospective follower forced
/// below -b_safe). On top of the incentive criterion, with probability
/// p_random a random safe adjacent lane is chosen.
inline LaneDecision mobil_decide(const MobilContext& ctx, const MobilParams& p,
                                 Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double draw = unit(rng);

  const auto left = detail::assess(ctx, ctx.left, p, +1);
  const auto right = detail::assess(ctx, ctx.right, p, -1);

  if (draw < p.p_random && (left.safe || right.safe)) {
    if (left.safe && right.safe) {
      return unit(rng) < 0.5 ? LaneDecision::Left : LaneDecision::Right;
    }
    return left.safe ? LaneDecision::Left : LaneDecision::Right;
  }

  const bool go_left = left.safe && left.incentive > p.a_threshold;
  const bool go_right = right.safe && right.incentive > p.a_threshold;
  if (go_left && go_right) {
    return left.incentive >= right.incentive ? LaneDecision::Left
                                             : LaneDecision::Right;
  }
  if (go_left) return LaneDecision::Left;
  if (go_right) return LaneDecision::Right;
  return LaneDecision::Stay;
}

inline IdmParams with_v0(IdmParams p, double v0) {
  p.v0 = v0;
  return p;
}

inline LaneView lane_view(const World& world, std::size_t subject, int lane,
                          double t) {
  LaneView view;
  if (lane < 0 || lane >= world.road.lane_count) return view;
  view.exists = true;
  view.allowed = !(world.deadend_active && lane == world.deadend_lane);
  view.leader = find_leader(world, subject, lane);
  if (auto f = find_follower(world, subject, lane); f && f->index) {
    const Vehicle& fv = world.vehicles[*f->index];
    view.follower = FollowerView{
        fv.state.v, with_v0(fv.profile.idm, effective_v0(fv.profile, t)),
        f->gap};
  }
  return view;
}

inline MobilContext mobil_context(const World& world, std::size_t subject,
                                  double t) {
  const Vehicle& me = world.vehicles[subject];
  MobilContext ctx;
  ctx.v = me.state.v;
  ctx.length = me.shape.length;
  ctx.idm = with_v0(me.profile.idm, effective_v0(me.profile, t));
  ctx.lane = me.lane;
  ctx.current = lane_view(world, subject, me.lane, t);
  ctx.current.allowed = true;
  ctx.left = lane_view(world, subject, me.lane + 1, t);
  ctx.right = lane_view(world, subject, me.lane - 1, t);
  return ctx;
}

// ---------------------------------------------------------------------------
// Composition

struct DriverCommand {
  sim::ControlInput control;
  LaneDecision decision = LaneDecision::Stay;
  int target_lane = 0;
  bool emergency = false;  // leader gap was non-positive
};

/// Pure-pursuit steering toward the centerline of `lane`. The lookahead grows
/// with speed (two seconds of travel, at least one vehicle length), which
/// spreads a full lane change over roughly two seconds.
inline double pursue_lane(const sim::RoadGeometry& road,
                          const sim::VehicleState& s,
                          const sim::VehicleShape& shape, int lane) {
  const double lookahead = std::max(2.0 * s.v, shape.length);
  const double dy = sim::lane_centerline(road, lane) - s.y;
  const double alpha = sim::normalize_angle(std::atan2(dy, lookahead) - s.psi);
  const double wheelbase = shape.l_r + shape.l_f;
  const double delta =
      std::atan(2.0 * wheelbase * std::sin(alpha) / lookahead);
  return std::clamp(delta, -sim::kDeltaMax, sim::kDeltaMax);
}

/// Lateral offset below which a vehicle counts as settled in its lane and
/// may start a new lane change.
inline constexpr double kSettledOffset = 0.3;

inline DriverCommand driver_control(const World& world, std::size_t subject,
                                    double t, Rng& rng) {
  const Vehicle& me = world.vehicles[subject];
  const BehaviourProfile& b = me.profile;
  DriverCommand cmd;
  cmd.target_lane = me.target_lane;

  const double offset =
      me.state.y - sim::lane_centerline(world.road, me.lane);
  const bool settled =
      me.target_lane == me.lane && std::abs(offset) < kSettledOffset;
  if (settled) {
    cmd.decision = mobil_decide(mobil_context(world, subject, t), b.mobil, rng);
    if (cmd.decision == LaneDecision::Left) cmd.target_lane = me.lane + 1;
    if (cmd.decision == LaneDecision::Right) cmd.target_lane = me.lane - 1;
  }

  // Nearest of: leaders in the lanes we occupy, and the cooperation target.
  std::optional<Neighbour> leader = find_leader(world, subject, me.lane);
  if (cmd.target_lane != me.lane) {
    auto other = find_leader(world, subject, cmd.target_lane);
    if (other && (!leader || other->gap < leader->gap)) leader = other;
  }
  if (auto yield_to = cooperation_check(world, subject, b, rng)) {
    const Vehicle& y = world.vehicles[*yield_to];
    const double gap = bumper_gap(me, y);
    if (!leader || gap < leader->gap) leader = Neighbour{yield_to, gap, y.state.v};
  }

  const IdmParams idm = with_v0(b.idm, effective_v0(b, t));
  if (leader) {
    cmd.emergency = !(leader->gap > 0.0);
    cmd.control.a_cmd = idm_acceleration(me.state.v, leader->gap, leader->v, idm);
  } else {
    cmd.control.a_cmd = idm_acceleration(me.state.v, kInfiniteGap, 0.0, idm);
  }
  cmd.control.delta_cmd =
      pursue_lane(world.road, me.state, me.shape, cmd.target_lane);
  return cmd;
}

}  // namespace densegap::drivers
