#pragma once

#include <random>
#include <vector>

#include "densegap/policy/network.hpp"

namespace fixtures {

using namespace densegap;

/// Roughly 200 parameters, every layer type present.
inline policy::NetSpec tiny_spec(policy::HeadKind head) {
  policy::NetSpec s;
  s.fov = 2;
  s.conv1_out = 2;
  s.conv1_kernel = 3;
  s.conv1_stride = 1;
  s.conv2_out = 2;
  s.conv2_kernel = 2;
  s.conv2_stride = 1;
  s.grid_dense = 4;
  s.ego_dense = 3;
  s.trunk = 6;
  s.head = head;
  s.outputs = head == policy::HeadKind::BetaShapes ? 4 : 1;
  return s;
}

inline env::Observation random_observation(int fov, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  env::Observation o;
  o.fov = fov;
  o.grid.resize(static_cast<std::size_t>(env::kGridChannels * env::kGridRows * (2 * fov + 1)));
  for (auto& x : o.grid) x = u(rng);
  for (auto& x : o.ego) x = u(rng);
  return o;
}

inline policy::Inputs random_inputs(int fov, int n, std::mt19937_64& rng) {
  std::vector<env::Observation> obs;
  for (int i = 0; i < n; ++i) obs.push_back(random_observation(fov, rng));
  std::vector<const env::Observation*> ptrs;
  for (const auto& o : obs) ptrs.push_back(&o);
  return policy::make_inputs(ptrs);
}

/// Max over parameters of |analytic - central difference| / max(|a|, |fd|, floor).
template <typename LossFn>
double max_fd_relative_error(const Eigen::VectorXd& params, const Eigen::VectorXd& analytic,
                             LossFn loss, double h = 1e-5, double floor = 1e-6) {
  double worst = 0.0;
  Eigen::VectorXd p = params;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double saved = p[k];
    p[k] = saved + h;
    const double up = loss(p);
    p[k] = saved - h;
    const double down = loss(p);
    p[k] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[k]), std::abs(fd), floor});
    worst = std::max(worst, std::abs(analytic[k] - fd) / denom);
  }
  return worst;
}

}  // namespace fixtures
