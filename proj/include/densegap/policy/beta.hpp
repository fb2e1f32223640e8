#pragma once

// Beta-distributed action heads: log-density, entropy, their derivatives in
// the shape parameters, sampling, and the affine map onto the ego's jerk and
// steering-rate limits.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "densegap/env/environment.hpp"

namespace densegap::policy {

inline constexpr double kUMin = 1e-6;
inline constexpr double kUMax = 1.0 - 1e-6;

struct BetaPair {
  double alpha_j = 1.0, beta_j = 1.0;  // jerk
  double alpha_s = 1.0, beta_s = 1.0;  // steering rate

  bool operator==(const BetaPair&) const = default;
};

inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double beta_logpdf(double a, double b, double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("beta_logpdf: u must lie in (0, 1)");
  if (!(a > 0.0 && b > 0.0)) throw std::domain_error("beta_logpdf: shapes must be positive");
  return (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) - log_beta_fn(a, b);
}

/// d logpdf / d(a, b).
inline std::array<double, 2> beta_logpdf_grad(double a, double b, double u) {
  using boost::math::digamma;
  const double common = digamma(a + b);
  return {std::log(u) - digamma(a) + common, std::log1p(-u) - digamma(b) + common};
}

inline double beta_entropy(double a, double b) {
  using boost::math::digamma;
  return log_beta_fn(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) +
         (a + b - 2.0) * digamma(a + b);
}

/// d entropy / d(a, b).
inline std::array<double, 2> beta_entropy_grad(double a, double b) {
  using boost::math::trigamma;
  const double common = (a + b - 2.0) * trigamma(a + b);
  return {-(a - 1.0) * trigamma(a) + common, -(b - 1.0) * trigamma(b) + common};
}

inline double beta_mean(double a, double b) { return a / (a + b); }

inline double clamp_u(double u) { return std::clamp(u, kUMin, kUMax); }

/// Maps u in [0, 1]^2 onto the jerk and steering-rate ranges.
inline env::EgoAction scale_action(double u_jerk, double u_steer) {
  return {env::kJerkMin + (env::kJerkMax - env::kJerkMin) * u_jerk,
          env::kSteerRateMin + (env::kSteerRateMax - env::kSteerRateMin) * u_steer};
}

/// Joint log-probability of u under the pair. The constant Jacobian of the
/// affine scaling is left out here and everywhere else.
inline double joint_logp(const BetaPair& p, const std::array<double, 2>& u) {
  return beta_logpdf(p.alpha_j, p.beta_j, u[0]) + beta_logpdf(p.alpha_s, p.beta_s, u[1]);
}

inline double joint_entropy(const BetaPair& p) {
  return beta_entropy(p.alpha_j, p.beta_j) + beta_entropy(p.alpha_s, p.beta_s);
}

struct ActionSample {
  std::array<double, 2> u{};
  env::EgoAction action;
  double logp = 0.0;
};

inline double sample_beta(double a, double b, std::mt19937_64& rng) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

inline ActionSample sample_and_scale(const BetaPair& p, std::mt19937_64& rng) {
  ActionSample s;
  s.u = {clamp_u(sample_beta(p.alpha_j, p.beta_j, rng)),
         clamp_u(sample_beta(p.alpha_s, p.beta_s, rng))};
  s.action = scale_action(s.u[0], s.u[1]);
  s.logp = joint_logp(p, s.u);
  return s;
}

/// Deterministic action at the distribution means.
inline ActionSample mean_action(const BetaPair& p) {
  ActionSample s;
  s.u = {clamp_u(beta_mean(p.alpha_j, p.beta_j)), clamp_u(beta_mean(p.alpha_s, p.beta_s))};
  s.action = scale_action(s.u[0], s.u[1]);
  s.logp = joint_logp(p, s.u);
  return s;
}

}  // namespace densegap::policy
