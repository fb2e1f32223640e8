#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "densegap/mpc.hpp"
#include "env_fixtures.hpp"
#include "oracles.hpp"

using namespace densegap;
using namespace densegap::mpc;
using fixtures::lone_ego;
using fixtures::parked;

namespace {

env::SimState two_lane_ego(double x, double v) {
  auto s = lone_ego(x, 1.5, v, 2);
  s.target_lane = 1;
  s.world.deadend_lane = 0;
  return s;
}

Trajectory straight(double v) {
  sim::VehicleState e;
  e.v = v;
  return rollout(e, Controls{0, 0, 0, 0, 0, 0}, sim::VehicleShape{});
}

Controls random_controls(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(sim::kAccelMin, sim::kAccelMax);
  std::uniform_real_distribution<double> d(-sim::kDeltaMax, sim::kDeltaMax);
  Controls u;
  for (int i = 0; i < kSegments; ++i) {
    u[2 * i] = a(rng);
    u[2 * i + 1] = d(rng);
  }
  return u;
}

}  // namespace

TEST(Target, OffsetAheadInDesiredLane) {
  auto s = two_lane_ego(100.0, 3.0);
  MpcParams p;
  p.s_offset = 3 * s.ego().shape.length;
  const auto t = target_state(s, p);
  EXPECT_DOUBLE_EQ(t.x, 112.0);
  EXPECT_DOUBLE_EQ(t.y, 4.5);
  EXPECT_EQ(t.psi, 0.0);
  EXPECT_EQ(t.v, s.ego_v_des);
}

TEST(Target, StraightAheadWhenAlreadyInLane) {
  auto s = two_lane_ego(100.0, 3.0);
  s.ego().state.y = 4.5;
  const auto t = target_state(s, MpcParams{});
  EXPECT_EQ(t.y, s.ego().state.y);
  EXPECT_GT(t.x, s.ego().state.x);
}

TEST(Target, ClampedBeforeDeadend) {
  auto s = two_lane_ego(0.0, 3.0);
  s.ego().state.x = s.world.road.deadend_s - 10.0;
  MpcParams p;
  p.s_offset = 20.0;
  EXPECT_DOUBLE_EQ(target_state(s, p).x - s.ego().state.x, 6.0);
  s.ego().state.y = 4.5;  // merged: the deadend no longer bounds the target
  EXPECT_DOUBLE_EQ(target_state(s, p).x - s.ego().state.x, 20.0);
}

TEST(Plan, ReachableTargetHasNearZeroObjective) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(0.5, 6.0), d(-0.3, 0.3);
  for (int i = 0; i < 20; ++i) {
    sim::VehicleState e;
    e.v = v(rng);
    e.psi = 0.3 * d(rng);
    sim::VehicleShape sh;
    sim::VehicleState t = e;
    for (int k = 0; k < kHorizonSteps; ++k) t = sim::integrate_bicycle(t, {}, sh, kPlanDt);
    const auto tr = plan_trajectory(e, t, sh);
    EXPECT_LT(tr.objective, 1e-3) << i;
  }
}

TEST(Plan, LaneChangeTargetReachedLaterally) {
  // Achievability by dense random restarts on an independent integrator.
  const double v0 = 2.5;
  const double tx = 15.0, ty = 3.0;
  auto oracle_final = [&](const Controls& u) {
    oracle::Pose p{0, 0, 0, v0};
    for (int k = 0; k < kHorizonSteps; ++k) {
      const int seg = k / kStepsPerSegment;
      p = oracle::exact_bicycle(p, u[2 * seg], u[2 * seg + 1], 2.0, 2.0, kPlanDt);
    }
    return p;
  };
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ua(-0.4, 0.4), ud(-0.3, 0.3);
  double oracle_best = 1e9;
  for (int r = 0; r < 3000; ++r) {
    Controls u;
    for (int i = 0; i < kSegments; ++i) { u[2 * i] = ua(rng); u[2 * i + 1] = ud(rng); }
    const auto p = oracle_final(u);
    if (std::abs(p.x - tx) < 1.0 && std::abs(p.psi) < 0.2)
      oracle_best = std::min(oracle_best, std::abs(p.y - ty));
  }
  ASSERT_LT(oracle_best, 0.3);

  sim::VehicleState e;
  e.v = v0;
  sim::VehicleState t;
  t.x = tx;
  t.y = ty;
  t.v = v0;
  const auto tr = plan_trajectory(e, t, sim::VehicleShape{});
  EXPECT_LT(std::abs(tr.states.back().y - ty), 0.3);
}

TEST(Plan, Deterministic) {
  sim::VehicleState e;
  e.v = 3.0;
  sim::VehicleState t;
  t.x = 20.0;
  t.y = 3.0;
  t.v = 3.0;
  const auto a = plan_trajectory(e, t, sim::VehicleShape{});
  const auto b = plan_trajectory(e, t, sim::VehicleShape{});
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.controls, b.controls);
}

TEST(Plan, DynamicallyConsistentAndNoWorseThanStarts) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const sim::VehicleShape sh;
  for (int i = 0; i < 25; ++i) {
    sim::VehicleState e;
    e.v = 6.0 * u(rng);
    e.y = 6.0 * u(rng);
    e.psi = 0.4 * (u(rng) - 0.5);
    sim::VehicleState t;
    t.x = 4.0 + 20.0 * u(rng);
    t.y = 6.0 * u(rng);
    t.v = 6.0 * u(rng);
    const auto tr = plan_trajectory(e, t, sh);
    ASSERT_EQ(tr.states.size(), 31u);
    ASSERT_EQ(tr.controls.size(), 30u);
    for (int k = 0; k < kHorizonSteps; ++k) {
      const auto re = sim::integrate_bicycle(tr.states[k], tr.controls[k], sh, kPlanDt);
      const auto& s = tr.states[k + 1];
      EXPECT_LT(std::abs(re.x - s.x) + std::abs(re.y - s.y) + std::abs(re.psi - s.psi) +
                    std::abs(re.v - s.v),
                1e-9);
    }
    for (const auto& st : start_points(e, t)) {
      const auto r = rollout(e, st, sh);
      EXPECT_LE(tr.objective, final_state_cost(r.states.back(), t, {}));
    }
  }
}

TEST(Check, CheckedIndexArithmetic) {
  EXPECT_EQ(checked_index(0.0), 0);
  EXPECT_EQ(checked_index(0.1), 3);
  EXPECT_EQ(checked_index(0.25), 8);
  EXPECT_EQ(checked_index(0.5), 15);
  EXPECT_EQ(checked_index(1.0), 30);
}

TEST(Check, FractionExamples) {
  const auto tr = straight(5.0);  // state k at x = k
  const sim::VehicleShape sh;
  const std::vector<drivers::Vehicle> obs{parked(1, 13.5, 0.0)};
  // Full-horizon oracle: first conflicting step.
  int first = -1;
  for (int k = 0; k <= kHorizonSteps && first < 0; ++k) {
    const auto& s = tr.states[k];
    if (oracle::grid_overlap({s.x, s.y, s.psi, 4.0, 1.8}, {13.5, 0.0, 0.0, 4.0, 1.8}, 60))
      first = k;
  }
  ASSERT_EQ(first, 10);
  EXPECT_TRUE(collision_fraction_check(tr, sh, obs, 0.25, ObstacleModel::Static));
  EXPECT_FALSE(collision_fraction_check(tr, sh, obs, 0.5, ObstacleModel::Static));

  const std::vector<drivers::Vehicle> near{parked(1, 5.5, 0.0)};  // conflicts from step 2
  EXPECT_TRUE(collision_fraction_check(tr, sh, near, 0.0, ObstacleModel::Static));
  EXPECT_FALSE(collision_fraction_check(tr, sh, near, 0.1, ObstacleModel::Static));
}

TEST(Check, ConstantVelocityObstacleMoves) {
  const auto tr = straight(5.0);
  const sim::VehicleShape sh;
  // Same speed, 4.5 m ahead: never touches under cv, touches at once if static
  // only once the ego has closed the gap.
  const std::vector<drivers::Vehicle> obs{parked(1, 4.5, 0.0, 5.0)};
  EXPECT_TRUE(collision_fraction_check(tr, sh, obs, 1.0, ObstacleModel::ConstantVelocity));
  EXPECT_FALSE(collision_fraction_check(tr, sh, obs, 1.0, ObstacleModel::Static));
}

TEST(Check, ZeroSpeedConstantVelocityEqualsStatic) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<drivers::Vehicle> obs;
  for (int i = 0; i < 50; ++i) {
    auto o = parked(i, 50.0 * u(rng), 5.0 * u(rng), 0.0, 3.0 * u(rng));
    o.state.delta = 0.6 * u(rng);
    obs.push_back(o);
  }
  const auto cv = predict_obstacles(obs, ObstacleModel::ConstantVelocity, kHorizonSteps);
  const auto st = predict_obstacles(obs, ObstacleModel::Static, kHorizonSteps);
  for (std::size_t i = 0; i < obs.size(); ++i)
    for (int k = 0; k <= kHorizonSteps; ++k) {
      EXPECT_EQ(cv[i][k].x, st[i][k].x);
      EXPECT_EQ(cv[i][k].y, st[i][k].y);
      EXPECT_EQ(cv[i][k].psi, st[i][k].psi);
      EXPECT_EQ(cv[i][k].v, st[i][k].v);
    }
}

TEST(Check, MonotoneInFraction) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const sim::VehicleShape sh;
  const double fractions[] = {0.0, 0.1, 0.25, 0.5, 1.0};
  for (int i = 0; i < 500; ++i) {
    sim::VehicleState e;
    e.v = 6.0 * u(rng);
    e.y = 9.0 * u(rng);
    const auto tr = rollout(e, random_controls(rng), sh);
    std::vector<drivers::Vehicle> obs;
    const int n = 1 + static_cast<int>(8 * u(rng));
    for (int j = 0; j < n; ++j) {
      auto o = parked(j + 1, 40.0 * u(rng) - 5.0, 9.0 * u(rng), 6.0 * u(rng), 0.4 * (u(rng) - 0.5));
      o.state.delta = 0.2 * (u(rng) - 0.5);
      obs.push_back(o);
    }
    for (auto m : {ObstacleModel::Static, ObstacleModel::ConstantVelocity}) {
      bool blocked = false;
      for (double f : fractions) {
        const bool clear = collision_fraction_check(tr, sh, obs, f, m);
        if (blocked) EXPECT_FALSE(clear);
        blocked = blocked || !clear;
      }
    }
  }
}

TEST(Step, EmptyRoadFollowsPlan) {
  auto s = two_lane_ego(100.0, 3.0);
  MpcParams p;
  const auto d = mpc_step(s, p);
  EXPECT_TRUE(d.clear);
  EXPECT_EQ(d.control, d.trajectory.controls.front());
  const auto again = mpc_step(s, p);
  EXPECT_EQ(again.control, d.control);
}

TEST(Step, WallInDesiredLaneBrakes) {
  auto s = two_lane_ego(100.0, 3.0);
  for (int i = 0; i < 12; ++i) s.world.vehicles.push_back(parked(i + 1, 80.0 + 4.5 * i, 4.5));
  MpcParams p;
  p.c_f = 1.0;
  const auto d = mpc_step(s, p);
  EXPECT_FALSE(d.clear);
  EXPECT_EQ(d.control.a_cmd, sim::kAccelMin);
  EXPECT_NEAR(d.control.delta_cmd, 0.0, 1e-12);  // already on the lane-0 centerline
}

TEST(Params, Validation) {
  MpcParams p;
  p.c_f = 1.5;
  EXPECT_THROW(validate(p), std::invalid_argument);
  p = {};
  p.s_offset = 0.0;
  EXPECT_THROW(validate(p), std::invalid_argument);
  EXPECT_EQ(parse_obstacle_model("static"), ObstacleModel::Static);
  EXPECT_THROW(parse_obstacle_model("x"), std::invalid_argument);
}
