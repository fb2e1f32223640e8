#pragma once

// Straight multi-lane road, kinematic bicycle integration and rectangle
// geometry. Everything in here is a pure function of its arguments.
//
// Coordinate convention: x runs along the road, y across it. Lane 0 occupies
// y in [0, lane_width) with its centerline at lane_width / 2; lane indices
// grow leftward (+y). Headings are measured from +x, counter-clockwise.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace densegap::sim {

inline constexpr double kDeltaMax = 0.6;   // rad
inline constexpr double kAccelMin = -4.0;  // m/s^2
inline constexpr double kAccelMax = 2.0;   // m/s^2

struct VehicleState {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double psi = 0.0;    // rad, (-pi, pi]
  double v = 0.0;      // m/s, never negative
  double a = 0.0;      // m/s^2
  double delta = 0.0;  // front steering angle, rad

  bool operator==(const VehicleState&) const = default;
};

struct VehicleShape {
  double length = 4.0;
  double width = 1.8;
  double l_r = 2.0;  // rear axle to center
  double l_f = 2.0;  // front axle to center

  bool operator==(const VehicleShape&) const = default;
};

struct RoadGeometry {
  int lane_count = 3;
  double lane_width = 3.0;
  double road_length = 1000.0;
  double deadend_s = 500.0;

  bool operator==(const RoadGeometry&) const = default;

  double width() const { return lane_count * lane_width; }
};

struct ControlInput {
  double a_cmd = 0.0;
  double delta_cmd = 0.0;

  bool operator==(const ControlInput&) const = default;
};

struct FrenetPose {
  double s = 0.0;
  double t = 0.0;
  double phi = 0.0;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

inline bool finite(const VehicleState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.psi) &&
         std::isfinite(s.v) && std::isfinite(s.a) && std::isfinite(s.delta);
}

}  // namespace detail

inline void validate(const VehicleShape& shape) {
  detail::require(std::isfinite(shape.length) && std::isfinite(shape.width) &&
                      std::isfinite(shape.l_r) && std::isfinite(shape.l_f),
                  "vehicle shape must be finite");
  detail::require(shape.length > 0.0 && shape.width > 0.0,
                  "vehicle length and width must be positive");
  detail::require(shape.l_r > 0.0 && shape.l_f >= 0.0 &&
                      shape.l_r + shape.l_f <= shape.length,
                  "axle distances must satisfy 0 < l_r, l_r + l_f <= length");
}

inline void validate(const RoadGeometry& road) {
  detail::require(road.lane_count == 2 || road.lane_count == 3,
                  "lane_count must be 2 or 3");
  detail::require(std::isfinite(road.lane_width) && road.lane_width > 0.0,
                  "lane_width must be positive");
  detail::require(std::isfinite(road.road_length) && road.road_length > 0.0,
                  "road_length must be positive");
  detail::require(road.deadend_s > 0.0 && road.deadend_s <= road.road_length,
                  "deadend_s must lie in (0, road_length]");
}

// Wraps to (-pi, pi].
inline double normalize_angle(double angle) {
  double r = std::remainder(angle, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

inline double slip_angle(double delta, const VehicleShape& shape) {
  detail::require(std::isfinite(delta), "steering angle must be finite");
  detail::require(std::abs(delta) < std::numbers::pi / 2.0,
                  "steering angle must satisfy |delta| < pi/2");
  return std::atan(shape.l_r / (shape.l_f + shape.l_r) * std::tan(delta));
}

namespace detail {

struct Kinematics {
  double x, y, psi, v;
};

inline Kinematics derivative(const Kinematics& k, double a, double beta,
                             double l_r) {
  return {k.v * std::cos(k.psi + beta), k.v * std::sin(k.psi + beta),
          k.v / l_r * std::sin(beta), a};
}

inline Kinematics axpy(const Kinematics& k, double h, const Kinematics& d) {
  return {k.x + h * d.x, k.y + h * d.y, k.psi + h * d.psi, k.v + h * d.v};
}

inline Kinematics rk4(const Kinematics& k0, double a, double beta, double l_r,
                      double h) {
  const Kinematics d1 = derivative(k0, a, beta, l_r);
  const Kinematics d2 = derivative(axpy(k0, h / 2, d1), a, beta, l_r);
  const Kinematics d3 = derivative(axpy(k0, h / 2, d2), a, beta, l_r);
  const Kinematics d4 = derivative(axpy(k0, h, d3), a, beta, l_r);
  return {k0.x + h / 6 * (d1.x + 2 * d2.x + 2 * d3.x + d4.x),
          k0.y + h / 6 * (d1.y + 2 * d2.y + 2 * d3.y + d4.y),
          k0.psi + h / 6 * (d1.psi + 2 * d2.psi + 2 * d3.psi + d4.psi),
          k0.v + h / 6 * (d1.v + 2 * d2.v + 2 * d3.v + d4.v)};
}

}  // namespace detail

/// One RK4 step of the kinematic bicycle with (a, delta) held over dt.
///
/// The command is clamped to the actuator envelope first and written into
/// the returned state. When braking would carry v below zero inside the step,
/// the step is cut at the stopping instant and the vehicle stays parked for
/// the remainder, so no reverse motion is ever integrated.
inline VehicleState integrate_bicycle(const VehicleState& state,
                                      const ControlInput& ctrl,
                                      const VehicleShape& shape, double dt) {
  detail::require(detail::finite(state), "vehicle state must be finite");
  detail::require(std::isfinite(ctrl.a_cmd) && std::isfinite(ctrl.delta_cmd),
                  "control input must be finite");
  detail::require(std::isfinite(dt) && dt > 0.0, "dt must be positive");

  const double a = std::clamp(ctrl.a_cmd, kAccelMin, kAccelMax);
  const double delta = std::clamp(ctrl.delta_cmd, -kDeltaMax, kDeltaMax);
  const double beta = slip_angle(delta, shape);

  double h = dt;
  const double v0 = std::max(state.v, 0.0);
  if (a < 0.0 && v0 + a * dt < 0.0) h = v0 / -a;

  detail::Kinematics k{state.x, state.y, state.psi, v0};
  if (h > 0.0) k = detail::rk4(k, a, beta, shape.l_r, h);

  VehicleState next;
  next.x = k.x;
  next.y = k.y;
  next.psi = normalize_angle(k.psi);
  next.v = h < dt ? 0.0 : std::max(k.v, 0.0);
  next.a = a;
  next.delta = delta;
  return next;
}

inline double lane_centerline(const RoadGeometry& road, int lane_index) {
  return (lane_index + 0.5) * road.lane_width;
}

/// Lane whose span contains lateral position y, or nullopt if y is off-road.
inline std::optional<int> lane_at(const RoadGeometry& road, double y) {
  if (!(y >= 0.0) || y >= road.width()) return std::nullopt;
  return std::min(static_cast<int>(std::floor(y / road.lane_width)),
                  road.lane_count - 1);
}

/// Nearest lane to y, clamped to the road.
inline int nearest_lane(const RoadGeometry& road, double y) {
  const int lane = static_cast<int>(std::floor(y / road.lane_width));
  return std::clamp(lane, 0, road.lane_count - 1);
}

inline FrenetPose frenet_of(const RoadGeometry& road, const VehicleState& state,
                            int lane_index) {
  detail::require(lane_index >= 0 && lane_index < road.lane_count,
                  "lane index out of range");
  return {state.x, state.y - lane_centerline(road, lane_index), state.psi};
}

/// Inverse of frenet_of for the pose fields; v, a and delta are taken from
/// `rest`.
inline VehicleState place_in_lane(const RoadGeometry& road, int lane_index,
                                  const FrenetPose& pose,
                                  const VehicleState& rest = {}) {
  detail::require(lane_index >= 0 && lane_index < road.lane_count,
                  "lane index out of range");
  VehicleState s = rest;
  s.x = pose.s;
  s.y = pose.t + lane_centerline(road, lane_index);
  s.psi = normalize_angle(pose.phi);
  return s;
}

// ---------------------------------------------------------------------------
// Rectangle geometry

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// Corners in counter-clockwise order: rear-right, front-right, front-left,
/// rear-left.
inline std::array<Vec2, 4> corners(const VehicleState& s,
                                   const VehicleShape& shape) {
  const double c = std::cos(s.psi);
  const double n = std::sin(s.psi);
  const double hl = shape.length / 2.0;
  const double hw = shape.width / 2.0;
  const Vec2 fwd{c * hl, n * hl};
  const Vec2 left{-n * hw, c * hw};
  const Vec2 center{s.x, s.y};
  return {center - fwd - left, center + fwd - left, center + fwd + left,
          center - fwd + left};
}

/// Lateral (y) extent of the vehicle footprint.
inline std::pair<double, double> lateral_extent(const VehicleState& s,
                                                const VehicleShape& shape) {
  const double half = std::abs(std::sin(s.psi)) * shape.length / 2.0 +
                      std::abs(std::cos(s.psi)) * shape.width / 2.0;
  return {s.y - half, s.y + half};
}

/// Longitudinal (x) extent of the vehicle footprint.
inline std::pair<double, double> longitudinal_extent(
    const VehicleState& s, const VehicleShape& shape) {
  const double half = std::abs(std::cos(s.psi)) * shape.length / 2.0 +
                      std::abs(std::sin(s.psi)) * shape.width / 2.0;
  return {s.x - half, s.x + half};
}

namespace detail {

inline bool separated_along(const std::array<Vec2, 4>& a,
                            const std::array<Vec2, 4>& b, Vec2 axis) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const Vec2& p : a) {
    const double d = dot(p, axis);
    amin = std::min(amin, d);
    amax = std::max(amax, d);
  }
  for (const Vec2& p : b) {
    const double d = dot(p, axis);
    bmin = std::min(bmin, d);
    bmax = std::max(bmax, d);
  }
  return amax < bmin || bmax < amin;
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double u = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const Vec2 d = p - (a + u * ab);
  return std::sqrt(dot(d, d));
}

}  // namespace detail

/// Separating-axis test over the four edge normals. Touching counts as
/// overlap.
inline bool obb_overlap(const VehicleState& sa, const VehicleShape& sha,
                        const VehicleState& sb, const VehicleShape& shb) {
  const auto ca = corners(sa, sha);
  const auto cb = corners(sb, shb);
  const std::array<Vec2, 4> axes{
      Vec2{std::cos(sa.psi), std::sin(sa.psi)},
      Vec2{-std::sin(sa.psi), std::cos(sa.psi)},
      Vec2{std::cos(sb.psi), std::sin(sb.psi)},
      Vec2{-std::sin(sb.psi), std::cos(sb.psi)}};
  for (const Vec2& axis : axes) {
    if (detail::separated_along(ca, cb, axis)) return false;
  }
  return true;
}

/// Euclidean distance between two rectangles, zero when they overlap. For
/// disjoint convex polygons the minimum is attained between a vertex of one
/// and an edge of the other, so enumerating those 32 pairs is exact.
inline double min_separation(const VehicleState& sa, const VehicleShape& sha,
                             const VehicleState& sb, const VehicleShape& shb) {
  if (obb_overlap(sa, sha, sb, shb)) return 0.0;
  const auto ca = corners(sa, sha);
  const auto cb = corners(sb, shb);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    const Vec2 a0 = ca[i], a1 = ca[(i + 1) % 4];
    const Vec2 b0 = cb[i], b1 = cb[(i + 1) % 4];
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, detail::point_segment_distance(cb[j], a0, a1));
      best = std::min(best, detail::point_segment_distance(ca[j], b0, b1));
    }
  }
  return best;
}

/// Cheap lower bound on min_separation, used to skip exact checks.
inline double separation_lower_bound(const VehicleState& sa,
                                     const VehicleShape& sha,
                                     const VehicleState& sb,
                                     const VehicleShape& shb) {
  const double ra = std::hypot(sha.length, sha.width) / 2.0;
  const double rb = std::hypot(shb.length, shb.width) / 2.0;
  return std::hypot(sa.x - sb.x, sa.y - sb.y) - ra - rb;
}

}  // namespace densegap::sim
