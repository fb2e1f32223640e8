#pragma once

// Rollout collection over several environment instances and the PPO
// training loop, with a learning curve and periodic checkpoints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "densegap/env/environment.hpp"
#include "densegap/policy/checkpoint.hpp"
#include "densegap/policy/ppo.hpp"

namespace densegap::policy {

using EnvFactory = std::function<std::unique_ptr<env::Environment>(int index)>;

struct TrainConfig {
  PpoConfig ppo;
  int num_envs = 8;
  std::uint64_t seed = 0;
  std::uint64_t total_steps = 0;
  int checkpoint_every = 10;  // updates between checkpoints
  std::string checkpoint_path;  // empty: no checkpoints
  std::string curve_path;       // empty: no CSV
  BetaPair initial_shapes = kInitialShapes;
  // Subtracted from the learning signal (not the reported returns) on steps
  // that end in collision, deadend overrun or leaving the road.
  double failure_penalty = 0.0;
};

inline bool is_failure(env::Outcome o) {
  return o == env::Outcome::Collision || o == env::Outcome::DeadendOverrun ||
         o == env::Outcome::OffRoad;
}

struct CurvePoint {
  int update_index = 0;
  std::uint64_t env_steps = 0;
  double median_reward_last_10 = std::numeric_limits<double>::quiet_NaN();
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  Learner learner;
  std::vector<CurvePoint> curve;
  std::vector<double> episode_returns;
  std::vector<env::Outcome> episode_outcomes;
  std::uint64_t env_steps = 0;
  int aborted_updates = 0;
  bool faulted = false;
  std::string fault;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed of the k-th training episode on environment instance i.
inline std::uint64_t episode_seed(std::uint64_t master, int instance, std::uint64_t k) {
  return splitmix64(splitmix64(master ^ 0x7261696eull) + splitmix64(static_cast<std::uint64_t>(instance) * 0x100000001b3ull + k));
}

inline double median_of_last(const std::vector<double>& v, std::size_t k) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> tail(v.end() - static_cast<std::ptrdiff_t>(std::min(k, v.size())), v.end());
  std::sort(tail.begin(), tail.end());
  const std::size_t n = tail.size();
  return n % 2 ? tail[n / 2] : 0.5 * (tail[n / 2 - 1] + tail[n / 2]);
}

inline void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write learning curve to '" + path + "'");
  out << "update_index,env_steps,median_reward_last_10,actor_loss,critic_loss,entropy\n";
  out.precision(10);
  for (const auto& p : curve) {
    out << p.update_index << ',' << p.env_steps << ',';
    if (std::isnan(p.median_reward_last_10)) out << "NA";
    else out << p.median_reward_last_10;
    out << ',' << p.actor_loss << ',' << p.critic_loss << ',' << p.entropy << '\n';
  }
}

inline Checkpoint to_checkpoint(const Learner& l, std::uint64_t steps) {
  return {l.actor, l.critic, steps};
}

/// Trains from freshly initialised networks sized for `fov`.
inline TrainResult train(const EnvFactory& factory, const TrainConfig& cfg,
                         const std::function<void(const CurvePoint&)>& on_update = {}) {
  validate(cfg.ppo);
  if (cfg.num_envs < 1) throw std::invalid_argument("num_envs must be positive");

  std::vector<std::unique_ptr<env::Environment>> envs;
  for (int i = 0; i < cfg.num_envs; ++i) envs.push_back(factory(i));
  const int fov = envs.front()->fov();

  TrainResult result{Learner::create(actor_spec(fov), critic_spec(fov), cfg.seed, cfg.initial_shapes), {}, {}, {}, 0, 0, false, {}};
  if (cfg.total_steps == 0) return result;

  Learner& learner = result.learner;
  std::mt19937_64 rng(splitmix64(cfg.seed));
  std::vector<std::uint64_t> episodes_started(envs.size(), 0);
  std::vector<env::Observation> current(envs.size());
  std::vector<double> running_return(envs.size(), 0.0);

  auto fail = [&](const std::string& what) {
    result.faulted = true;
    result.fault = what;
    if (!cfg.checkpoint_path.empty()) save_checkpoint(to_checkpoint(learner, result.env_steps), cfg.checkpoint_path);
    if (!cfg.curve_path.empty()) write_curve_csv(cfg.curve_path, result.curve);
    return result;
  };

  try {
    for (std::size_t i = 0; i < envs.size(); ++i)
      current[i] = envs[i]->reset(episode_seed(cfg.seed, static_cast<int>(i), episodes_started[i]++));
  } catch (const std::exception& e) {
    return fail(std::string("environment reset failed: ") + e.what());
  }

  const std::uint64_t per_env =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(cfg.ppo.steps_per_update) / envs.size());
  int update = 0;
  while (result.env_steps < cfg.total_steps) {
    const std::uint64_t remaining = cfg.total_steps - result.env_steps;
    const std::uint64_t horizon =
        std::min<std::uint64_t>(per_env, (remaining + envs.size() - 1) / envs.size());
    std::vector<RolloutBatch> segments(envs.size());

    for (std::uint64_t t = 0; t < horizon; ++t) {
      std::vector<const env::Observation*> obs;
      for (const auto& o : current) obs.push_back(&o);
      const Inputs in = make_inputs(obs);
      const MatrixXd shapes = learner.actor_net.forward(learner.actor, in);
      const MatrixXd values = learner.critic_net.forward(learner.critic, in);
      for (std::size_t i = 0; i < envs.size(); ++i) {
        const ActionSample a = sample_and_scale(to_beta_pair(shapes, static_cast<Eigen::Index>(i)), rng);
        env::StepResult r;
        try {
          r = envs[i]->step(a.action);
        } catch (const std::exception& e) {
          return fail(std::string("environment step failed: ") + e.what());
        }
        if (!std::isfinite(r.reward)) return fail("environment returned a non-finite reward");
        auto& seg = segments[i];
        seg.observations.push_back(current[i]);
        seg.u.push_back(a.u);
        seg.logp.push_back(a.logp);
        seg.rewards.push_back(r.reward - (is_failure(r.outcome) ? cfg.failure_penalty : 0.0));
        seg.values.push_back(values(0, static_cast<Eigen::Index>(i)));
        const bool done = env::is_terminal(r.outcome);
        seg.done.push_back(done ? 1 : 0);
        running_return[i] += r.reward;
        result.env_steps += 1;
        if (done) {
          result.episode_returns.push_back(running_return[i]);
          result.episode_outcomes.push_back(r.outcome);
          running_return[i] = 0.0;
          try {
            current[i] = envs[i]->reset(episode_seed(cfg.seed, static_cast<int>(i), episodes_started[i]++));
          } catch (const std::exception& e) {
            return fail(std::string("environment reset failed: ") + e.what());
          }
        } else {
          current[i] = std::move(r.obs);
        }
      }
    }

    // Bootstrap each segment from the value of its next observation.
    std::vector<const env::Observation*> obs;
    for (const auto& o : current) obs.push_back(&o);
    const MatrixXd next_values = learner.critic_net.forward(learner.critic, make_inputs(obs));
    RolloutBatch batch;
    for (std::size_t i = 0; i < envs.size(); ++i) {
      auto& seg = segments[i];
      auto g = gae(seg.rewards, seg.values, seg.done, next_values(0, static_cast<Eigen::Index>(i)),
                   cfg.ppo.gamma, cfg.ppo.gae_lambda);
      seg.advantages = std::move(g.advantages);
      seg.returns = std::move(g.returns);
      batch.append(seg);
    }

    PpoConfig ppo = cfg.ppo;
    ppo.minibatch_size = std::min<int>(ppo.minibatch_size, static_cast<int>(batch.size()));
    const PpoDiagnostics d = ppo_update(learner, batch, ppo, rng);
    if (d.aborted) result.aborted_updates += 1;

    CurvePoint p;
    p.update_index = update;
    p.env_steps = result.env_steps;
    p.median_reward_last_10 = median_of_last(result.episode_returns, 10);
    p.actor_loss = d.actor_loss;
    p.critic_loss = d.critic_loss;
    p.entropy = d.entropy;
    result.curve.push_back(p);
    if (on_update) on_update(p);
    ++update;

    if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 && update % cfg.checkpoint_every == 0)
      save_checkpoint(to_checkpoint(learner, result.env_steps), cfg.checkpoint_path);
  }

  if (!cfg.checkpoint_path.empty()) save_checkpoint(to_checkpoint(learner, result.env_steps), cfg.checkpoint_path);
  if (!cfg.curve_path.empty()) write_curve_csv(cfg.curve_path, result.curve);
  return result;
}

}  // namespace densegap::policy
