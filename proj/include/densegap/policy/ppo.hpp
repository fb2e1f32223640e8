#pragma once

// Proximal policy optimisation with a clipped surrogate, generalized
// advantage estimation and Adam.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "densegap/policy/beta.hpp"
#include "densegap/policy/network.hpp"

namespace densegap::policy {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double learning_rate = 3e-4;
  int epochs_per_update = 10;
  int minibatch_size = 256;
  int steps_per_update = 4096;
  double entropy_coefficient = 0.01;
  double value_coefficient = 0.5;
  double max_grad_norm = 0.5;

  bool operator==(const PpoConfig&) const = default;
};

inline void validate(const PpoConfig& c) {
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(c.gae_lambda > 0.0 && c.gae_lambda <= 1.0))
    throw std::invalid_argument("gae_lambda must be in (0, 1]");
  if (!(c.clip_epsilon > 0.0)) throw std::invalid_argument("clip_epsilon must be positive");
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (c.epochs_per_update < 1 || c.minibatch_size < 1 || c.steps_per_update < 1)
    throw std::invalid_argument("epochs, minibatch and steps per update must be positive");
  if (c.entropy_coefficient < 0.0 || c.value_coefficient < 0.0 || !(c.max_grad_norm > 0.0))
    throw std::invalid_argument("loss coefficients must be non-negative");
}

// ---------------------------------------------------------------------------
// Advantages

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// done[t] marks a terminal transition at t; `bootstrap` is the value of the
/// state following the last step (ignored if that step is terminal).
inline GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
                     const std::vector<std::uint8_t>& done, double bootstrap, double gamma,
                     double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || done.size() != n)
    throw std::invalid_argument("gae: rewards, values and done flags differ in length");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap;
  for (std::size_t i = n; i-- > 0;) {
    const double keep = done[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * keep - values[i];
    next_adv = delta + gamma * lambda * keep * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
    next_value = values[i];
  }
  return out;
}

inline std::vector<double> normalize_advantages(std::vector<double> a) {
  if (a.empty()) return a;
  const double n = static_cast<double>(a.size());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / n);
  for (double& x : a) x = (x - mean) / (sd + 1e-8);
  return a;
}

// ---------------------------------------------------------------------------
// Rollout storage

struct RolloutBatch {
  std::vector<env::Observation> observations;
  std::vector<std::array<double, 2>> u;
  std::vector<double> logp;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> done;
  std::vector<double> advantages;  // filled by gae
  std::vector<double> returns;

  std::size_t size() const { return observations.size(); }

  void check() const {
    const std::size_t n = size();
    if (u.size() != n || logp.size() != n || rewards.size() != n || values.size() != n ||
        done.size() != n || advantages.size() != n || returns.size() != n)
      throw std::invalid_argument("rollout batch arrays differ in length");
    for (const auto& x : u) {
      if (!(x[0] > 0.0 && x[0] < 1.0 && x[1] > 0.0 && x[1] < 1.0))
        throw std::invalid_argument("rollout batch holds u outside (0, 1)");
    }
  }

  void append(const RolloutBatch& o) {
    auto cat = [](auto& a, const auto& b) { a.insert(a.end(), b.begin(), b.end()); };
    cat(observations, o.observations);
    cat(u, o.u);
    cat(logp, o.logp);
    cat(rewards, o.rewards);
    cat(values, o.values);
    cat(done, o.done);
    cat(advantages, o.advantages);
    cat(returns, o.returns);
  }
};

inline Inputs gather_inputs(const RolloutBatch& b, const std::vector<std::size_t>& idx) {
  std::vector<const env::Observation*> obs;
  obs.reserve(idx.size());
  for (std::size_t i : idx) obs.push_back(&b.observations[i]);
  return make_inputs(obs);
}

// ---------------------------------------------------------------------------
// Objectives

struct Objective {
  double loss = 0.0;
  VectorXd grad;
  double entropy = 0.0;        // mean joint entropy
  double clip_fraction = 0.0;
  double approx_kl = 0.0;      // mean(logp_old - logp_new)
  double max_ratio_dev = 0.0;  // max |ratio - 1|
};

/// Clipped surrogate with entropy bonus, averaged over the samples:
///   L = -mean(min(r A, clip(r, 1 - eps, 1 + eps) A)) - c_ent * mean(H)
inline Objective actor_objective(const Network& net, const ParameterBlock& p, const Inputs& in,
                                 const std::vector<std::array<double, 2>>& u,
                                 const std::vector<double>& logp_old,
                                 const std::vector<double>& adv, double clip_eps,
                                 double ent_coef) {
  Network::Cache cache;
  const MatrixXd shapes = net.forward(p, in, &cache);
  const Eigen::Index n = shapes.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  MatrixXd d_out(4, n);
  Objective out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const BetaPair bp = to_beta_pair(shapes, i);
    const auto& ui = u[static_cast<std::size_t>(i)];
    const double logp = joint_logp(bp, ui);
    const double ratio = std::exp(logp - logp_old[static_cast<std::size_t>(i)]);
    const double a = adv[static_cast<std::size_t>(i)];
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    const bool clip_active = ratio * a > clipped * a;
    const double surrogate = clip_active ? clipped * a : ratio * a;
    const double h = joint_entropy(bp);
    out.loss -= inv_n * (surrogate + ent_coef * h);
    out.entropy += inv_n * h;
    out.approx_kl += inv_n * (logp_old[static_cast<std::size_t>(i)] - logp);
    out.clip_fraction += inv_n * (std::abs(ratio - 1.0) > clip_eps ? 1.0 : 0.0);
    out.max_ratio_dev = std::max(out.max_ratio_dev, std::abs(ratio - 1.0));

    // dL/dlogp, then through the Beta log-densities and entropies.
    const double d_logp = clip_active ? 0.0 : -inv_n * ratio * a;
    const auto gj = beta_logpdf_grad(bp.alpha_j, bp.beta_j, ui[0]);
    const auto gs = beta_logpdf_grad(bp.alpha_s, bp.beta_s, ui[1]);
    const auto hj = beta_entropy_grad(bp.alpha_j, bp.beta_j);
    const auto hs = beta_entropy_grad(bp.alpha_s, bp.beta_s);
    const double d_h = -inv_n * ent_coef;
    d_out(0, i) = d_logp * gj[0] + d_h * hj[0];
    d_out(1, i) = d_logp * gj[1] + d_h * hj[1];
    d_out(2, i) = d_logp * gs[0] + d_h * hs[0];
    d_out(3, i) = d_logp * gs[1] + d_h * hs[1];
  }
  out.grad = net.backward(p, in, cache, d_out);
  return out;
}

/// L = c_v * mean((V - R)^2)
inline Objective critic_objective(const Network& net, const ParameterBlock& p, const Inputs& in,
                                  const std::vector<double>& returns, double value_coef) {
  Network::Cache cache;
  const MatrixXd v = net.forward(p, in, &cache);
  const Eigen::Index n = v.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  MatrixXd d_out(1, n);
  Objective out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double err = v(0, i) - returns[static_cast<std::size_t>(i)];
    out.loss += value_coef * inv_n * err * err;
    d_out(0, i) = 2.0 * value_coef * inv_n * err;
  }
  out.grad = net.backward(p, in, cache, d_out);
  return out;
}

// ---------------------------------------------------------------------------
// Optimiser

struct AdamState {
  VectorXd m, v;
  std::int64_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  bool operator==(const AdamState& o) const {
    return t == o.t && m.size() == o.m.size() && (m.array() == o.m.array()).all() &&
           (v.array() == o.v.array()).all();
  }
};

inline AdamState make_adam(std::size_t n) {
  AdamState s;
  s.m = VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.v = VectorXd::Zero(static_cast<Eigen::Index>(n));
  return s;
}

inline void adam_step(VectorXd& params, const VectorXd& grad, AdamState& s, double lr) {
  s.t += 1;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

/// Rescales grad in place so its Euclidean norm is at most max_norm.
/// Returns the norm before clipping.
inline double clip_grad_norm(VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm) grad *= max_norm / norm;
  return norm;
}

// ---------------------------------------------------------------------------
// Update

/// Actor and critic with their optimiser state.
/// Starting action distribution: zero mean jerk, zero mean steering rate,
/// moderately concentrated.
inline constexpr BetaPair kInitialShapes{4.0, 2.0, 3.0, 3.0};

struct Learner {
  Network actor_net{actor_spec()};
  Network critic_net{critic_spec()};
  ParameterBlock actor;
  ParameterBlock critic;
  AdamState actor_opt;
  AdamState critic_opt;

  static Learner create(const NetSpec& a, const NetSpec& c, std::uint64_t seed,
                        const BetaPair& initial_shapes = kInitialShapes) {
    Learner l{Network(a), Network(c), {}, {}, {}, {}};
    l.actor = l.actor_net.init(seed * 2 + 1, 0.01);
    if (a.head == HeadKind::BetaShapes)
      l.actor_net.set_head_bias(l.actor, beta_head_bias(initial_shapes));
    l.critic = l.critic_net.init(seed * 2 + 2, 1.0);
    l.actor_opt = make_adam(l.actor.parameter_count());
    l.critic_opt = make_adam(l.critic.parameter_count());
    return l;
  }
};

struct PpoDiagnostics {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double initial_ratio_dev = 0.0;  // max |ratio - 1| before the first step
  int minibatches = 0;
  bool aborted = false;
  std::string reason;
};

inline bool all_finite(const VectorXd& v) { return v.allFinite(); }

/// Runs epochs x minibatches of clipped-surrogate and value updates. On a
/// non-finite loss or gradient the learner is restored to its state before
/// the call and the diagnostics say why.
inline PpoDiagnostics ppo_update(Learner& learner, const RolloutBatch& batch,
                                 const PpoConfig& cfg, std::mt19937_64& rng) {
  validate(cfg);
  batch.check();
  PpoDiagnostics diag;
  const std::size_t n = batch.size();
  if (n == 0) return diag;

  const Learner snapshot = learner;
  const std::vector<double> adv = normalize_advantages(batch.advantages);
  const std::size_t mb = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatch_size), n);

  auto select = [](const std::vector<double>& v, const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
  };
  auto select_u = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::array<double, 2>> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(batch.u[i]);
    return out;
  };
  auto abort = [&](const std::string& why) {
    learner = snapshot;
    diag.aborted = true;
    diag.reason = why;
    return diag;
  };

  // Log-probabilities recomputed under the unchanged parameters.
  for (std::size_t start = 0; start < n; start += mb) {
    std::vector<std::size_t> idx(std::min(mb, n - start));
    std::iota(idx.begin(), idx.end(), start);
    const MatrixXd shapes = learner.actor_net.forward(learner.actor, gather_inputs(batch, idx));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double lp = joint_logp(to_beta_pair(shapes, static_cast<Eigen::Index>(k)),
                                   batch.u[idx[k]]);
      diag.initial_ratio_dev =
          std::max(diag.initial_ratio_dev, std::abs(std::exp(lp - batch.logp[idx[k]]) - 1.0));
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double sum_actor = 0, sum_critic = 0, sum_ent = 0, sum_kl = 0, sum_clip = 0;
  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + mb <= n; start += mb) {
      const std::size_t end = start + mb;
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      const Inputs in = gather_inputs(batch, idx);

      Objective a = actor_objective(learner.actor_net, learner.actor, in, select_u(idx),
                                    select(batch.logp, idx), select(adv, idx),
                                    cfg.clip_epsilon, cfg.entropy_coefficient);
      Objective c = critic_objective(learner.critic_net, learner.critic, in,
                                     select(batch.returns, idx), cfg.value_coefficient);
      if (!std::isfinite(a.loss) || !std::isfinite(c.loss)) return abort("non-finite loss");
      if (!all_finite(a.grad) || !all_finite(c.grad)) return abort("non-finite gradient");

      clip_grad_norm(a.grad, cfg.max_grad_norm);
      clip_grad_norm(c.grad, cfg.max_grad_norm);
      adam_step(learner.actor.values, a.grad, learner.actor_opt, cfg.learning_rate);
      adam_step(learner.critic.values, c.grad, learner.critic_opt, cfg.learning_rate);
      if (!all_finite(learner.actor.values) || !all_finite(learner.critic.values))
        return abort("non-finite parameters");

      sum_actor += a.loss;
      sum_critic += c.loss;
      sum_ent += a.entropy;
      sum_kl += a.approx_kl;
      sum_clip += a.clip_fraction;
      diag.minibatches += 1;
    }
  }
  const double k = std::max(1, diag.minibatches);
  diag.actor_loss = sum_actor / k;
  diag.critic_loss = sum_critic / k;
  diag.entropy = sum_ent / k;
  diag.approx_kl = sum_kl / k;
  diag.clip_fraction = sum_clip / k;
  return diag;
}

}  // namespace densegap::policy
