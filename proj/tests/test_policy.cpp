#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "densegap/policy/beta.hpp"
#include "densegap/policy/checkpoint.hpp"
#include "densegap/policy/network.hpp"
#include "densegap/policy/ppo.hpp"
#include "densegap/policy/trainer.hpp"
#include "oracles.hpp"
#include "policy_fixtures.hpp"

using namespace densegap;
using namespace densegap::policy;

TEST(Beta, LogPdfExamples) {
  for (double u : {0.01, 0.3, 0.99}) EXPECT_EQ(beta_logpdf(1.0, 1.0, u), 0.0);
  EXPECT_NEAR(beta_logpdf(2.0, 2.0, 0.5), std::log(1.5), 1e-15);
  EXPECT_NEAR(std::log(1.5), 0.405465, 1e-6);
  for (double u : {0.1, 0.25, 0.7}) {
    EXPECT_NEAR(beta_logpdf(2.0, 2.0, u), std::log(oracle::beta_pdf_closed_form_2_2(u)), 1e-14);
  }
  EXPECT_THROW(beta_logpdf(2.0, 2.0, 0.0), std::domain_error);
  EXPECT_THROW(beta_logpdf(2.0, 2.0, 1.0), std::domain_error);
}

TEST(Beta, Reflection) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> s(1.0, 20.0), u(0.001, 0.999);
  for (int i = 0; i < 1000; ++i) {
    const double a = s(rng), b = s(rng), x = u(rng);
    EXPECT_NEAR(beta_logpdf(a, b, x), beta_logpdf(b, a, 1.0 - x), 1e-10);
  }
}

TEST(Beta, DensityIntegratesToOne) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> s(1.0, 30.0);
  for (int i = 0; i < 50; ++i) {
    const double a = s(rng), b = s(rng);
    const double mass = oracle::tanh_sinh_unit([&](double u, double um) {
      return std::exp((a - 1.0) * std::log(u) + (b - 1.0) * std::log(um) - log_beta_fn(a, b));
    });
    const double via_impl = oracle::tanh_sinh_unit([&](double u, double) {
      return u < 1.0 ? std::exp(beta_logpdf(a, b, u)) : 0.0;
    });
    EXPECT_NEAR(mass, 1.0, 1e-6) << a << " " << b;
    EXPECT_NEAR(via_impl, 1.0, 1e-6) << a << " " << b;
  }
}

TEST(Beta, EntropyPeaksAtUniform) {
  EXPECT_NEAR(beta_entropy(1.0, 1.0), 0.0, 1e-15);
  // Below zero everywhere else; at a fixed mean it falls as the shapes grow.
  for (double a = 1.0; a <= 10.0; a += 0.5) {
    for (double b = 1.0; b <= 10.0; b += 0.5) {
      if (a > 1.0 || b > 1.0) EXPECT_LT(beta_entropy(a, b), 0.0);
      for (double k = 1.25; k <= 3.0; k += 0.25) {
        EXPECT_LT(beta_entropy(k * a, k * b), beta_entropy((k - 0.25) * a, (k - 0.25) * b));
      }
    }
  }
  for (double a = 1.0; a <= 10.0; a += 0.5) {
    EXPECT_LT(beta_entropy(a + 0.5, a + 0.5), beta_entropy(a, a));
    EXPECT_LT(beta_entropy(a + 0.5, 1.0), beta_entropy(a, 1.0));
  }
}

TEST(Beta, EntropyMatchesQuadrature) {
  for (auto [a, b] : {std::pair{2.0, 3.0}, {1.5, 1.5}, {7.0, 2.0}}) {
    const double h = oracle::tanh_sinh_unit([&](double u, double um) {
      const double lp = (a - 1.0) * std::log(u) + (b - 1.0) * std::log(um) - log_beta_fn(a, b);
      return -std::exp(lp) * lp;
    });
    EXPECT_NEAR(beta_entropy(a, b), h, 1e-9);
  }
}

TEST(Beta, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> s(1.0, 15.0), u(0.01, 0.99);
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const double a = s(rng), b = s(rng), x = u(rng);
    const auto g = beta_logpdf_grad(a, b, x);
    EXPECT_NEAR(g[0], (beta_logpdf(a + h, b, x) - beta_logpdf(a - h, b, x)) / (2 * h), 1e-6);
    EXPECT_NEAR(g[1], (beta_logpdf(a, b + h, x) - beta_logpdf(a, b - h, x)) / (2 * h), 1e-6);
    const auto e = beta_entropy_grad(a, b);
    EXPECT_NEAR(e[0], (beta_entropy(a + h, b) - beta_entropy(a - h, b)) / (2 * h), 1e-6);
    EXPECT_NEAR(e[1], (beta_entropy(a, b + h) - beta_entropy(a, b - h)) / (2 * h), 1e-6);
  }
}

TEST(Beta, Scaling) {
  EXPECT_EQ(scale_action(0.0, 0.0), (env::EgoAction{-4.0, -0.4}));
  EXPECT_EQ(scale_action(1.0, 1.0), (env::EgoAction{2.0, 0.4}));
  const auto mid = scale_action(0.5, 0.5);
  EXPECT_DOUBLE_EQ(mid.jerk, -1.0);
  EXPECT_DOUBLE_EQ(mid.steer_rate, 0.0);
}

TEST(Beta, SamplingMatchesMoments) {
  std::mt19937_64 rng(4);
  BetaPair p{2.0, 5.0, 3.0, 3.0};
  double sum_j = 0.0, sum_s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_and_scale(p, rng);
    ASSERT_GE(s.u[0], kUMin);
    ASSERT_LE(s.u[0], kUMax);
    ASSERT_DOUBLE_EQ(s.logp, joint_logp(p, s.u));
    sum_j += s.u[0];
    sum_s += s.u[1];
  }
  EXPECT_NEAR(sum_j / n, 2.0 / 7.0, 0.003);
  EXPECT_NEAR(sum_s / n, 0.5, 0.003);
}

TEST(Network, ZeroParameters) {
  std::mt19937_64 rng(5);
  Network actor(actor_spec()), critic(critic_spec());
  const auto in = fixtures::random_inputs(50, 3, rng);
  const auto a = actor.forward(actor.zeros(), in);
  for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a(i), 1.0 + std::log(2.0));
  const auto c = critic.forward(critic.zeros(), in);
  for (Eigen::Index i = 0; i < c.size(); ++i) EXPECT_EQ(c(i), 0.0);
}

TEST(Network, ParameterCount) {
  Network actor(actor_spec()), critic(critic_spec());
  EXPECT_EQ(actor.parameter_count(), 44068u);
  EXPECT_EQ(critic.parameter_count(), 43681u);
  const auto total = actor.parameter_count() + critic.parameter_count();
  EXPECT_GE(total, 80000u);
  EXPECT_LE(total, 160000u);
  EXPECT_EQ(layout_size(actor.layout()), actor.parameter_count());
}

TEST(Network, OutputsFiniteAndBounded) {
  std::mt19937_64 rng(6);
  Network actor(actor_spec()), critic(critic_spec());
  const auto pa = actor.init(1, 1.0), pc = critic.init(2, 1.0);
  for (int batch = 0; batch < 10; ++batch) {
    auto in = fixtures::random_inputs(50, 1000, rng);
    in.grid *= 5.0;
    const auto a = actor.forward(pa, in);
    const auto c = critic.forward(pc, in);
    EXPECT_TRUE(a.allFinite());
    EXPECT_TRUE(c.allFinite());
    EXPECT_GE(a.minCoeff(), 1.0);
  }
}

TEST(Network, DeterministicAndBatchIndependent) {
  std::mt19937_64 rng(7);
  Network actor(actor_spec());
  const auto p = actor.init(3);
  const auto in = fixtures::random_inputs(50, 4, rng);
  const auto a = actor.forward(p, in), b = actor.forward(p, in);
  EXPECT_TRUE((a.array() == b.array()).all());
  Inputs one{in.grid.col(2), in.ego.col(2)};
  const auto single = actor.forward(p, one);
  EXPECT_NEAR((single.col(0) - a.col(2)).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(Network, RejectsShapeMismatch) {
  std::mt19937_64 rng(8);
  Network actor(actor_spec());
  const auto in = fixtures::random_inputs(10, 2, rng);
  EXPECT_THROW(actor.forward(actor.zeros(), in), std::invalid_argument);
  Network small(actor_spec(10));
  EXPECT_THROW(small.forward(actor.zeros(), in), std::invalid_argument);
}

TEST(Network, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (auto head : {HeadKind::BetaShapes, HeadKind::Linear}) {
    Network net(fixtures::tiny_spec(head));
    for (int trial = 0; trial < 5; ++trial) {
      const auto p = net.init(100 + trial, 1.0);
      const auto in = fixtures::random_inputs(2, 7, rng);
      Eigen::MatrixXd w = Eigen::MatrixXd::Random(net.spec().outputs, 7);
      Network::Cache cache;
      net.forward(p, in, &cache);
      const auto g = net.backward(p, in, cache, w);
      auto loss = [&](const Eigen::VectorXd& v) {
        ParameterBlock q = p;
        q.values = v;
        return (net.forward(q, in).array() * w.array()).sum();
      };
      EXPECT_LT(fixtures::max_fd_relative_error(p.values, g, loss), 1e-4);
    }
  }
}

TEST(Ppo, ObjectiveGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  Network actor(fixtures::tiny_spec(HeadKind::BetaShapes));
  Network critic(fixtures::tiny_spec(HeadKind::Linear));
  std::uniform_real_distribution<double> uu(0.05, 0.95), n(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto pa = actor.init(200 + trial, 1.0), pc = critic.init(300 + trial, 1.0);
    const int m = 16;
    const auto in = fixtures::random_inputs(2, m, rng);
    std::vector<std::array<double, 2>> u(m);
    std::vector<double> adv(m), ret(m), old(m);
    const auto shapes = actor.forward(pa, in);
    for (int i = 0; i < m; ++i) {
      u[i] = {uu(rng), uu(rng)};
      adv[i] = n(rng);
      ret[i] = 3.0 * n(rng);
      old[i] = joint_logp(to_beta_pair(shapes, i), u[i]) + 0.4 * n(rng);
    }
    const auto a = actor_objective(actor, pa, in, u, old, adv, 0.2, 0.01);
    worst = std::max(worst, fixtures::max_fd_relative_error(pa.values, a.grad, [&](const Eigen::VectorXd& v) {
      ParameterBlock q = pa;
      q.values = v;
      return actor_objective(actor, q, in, u, old, adv, 0.2, 0.01).loss;
    }));
    const auto c = critic_objective(critic, pc, in, ret, 0.5);
    worst = std::max(worst, fixtures::max_fd_relative_error(pc.values, c.grad, [&](const Eigen::VectorXd& v) {
      ParameterBlock q = pc;
      q.values = v;
      return critic_objective(critic, q, in, ret, 0.5).loss;
    }));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Ppo, ClipInactiveWhenRatiosInsideBand) {
  std::mt19937_64 rng(11);
  Network actor(fixtures::tiny_spec(HeadKind::BetaShapes));
  const auto p = actor.init(5, 1.0);
  const int m = 10;
  const auto in = fixtures::random_inputs(2, m, rng);
  const auto shapes = actor.forward(p, in);
  std::vector<std::array<double, 2>> u(m);
  std::vector<double> adv(m), old(m);
  std::uniform_real_distribution<double> uu(0.1, 0.9), n(-1.0, 1.0);
  for (int i = 0; i < m; ++i) {
    u[i] = {uu(rng), uu(rng)};
    adv[i] = n(rng);
    old[i] = joint_logp(to_beta_pair(shapes, i), u[i]) + 0.05 * n(rng);
  }
  const auto clipped = actor_objective(actor, p, in, u, old, adv, 0.2, 0.0);
  const auto unclipped = actor_objective(actor, p, in, u, old, adv, 1e9, 0.0);
  EXPECT_EQ(clipped.loss, unclipped.loss);
  EXPECT_TRUE((clipped.grad.array() == unclipped.grad.array()).all());
  EXPECT_EQ(clipped.clip_fraction, 0.0);
}

TEST(Gae, Examples) {
  auto r = gae({1.0}, {0.3}, {1}, 123.0, 0.99, 0.95);
  EXPECT_DOUBLE_EQ(r.advantages[0], 0.7);
  EXPECT_DOUBLE_EQ(r.returns[0], 1.0);

  const std::vector<double> rew{1.0, -0.5, 2.0}, val{0.2, 0.4, -0.1};
  r = gae(rew, val, {0, 0, 0}, 0.7, 0.9, 0.0);
  EXPECT_DOUBLE_EQ(r.advantages[0], 1.0 + 0.9 * 0.4 - 0.2);
  EXPECT_DOUBLE_EQ(r.advantages[1], -0.5 + 0.9 * -0.1 - 0.4);
  EXPECT_DOUBLE_EQ(r.advantages[2], 2.0 + 0.9 * 0.7 + 0.1);

  EXPECT_THROW(gae({1.0, 2.0}, {0.0}, {0, 0}, 0.0, 0.9, 0.9), std::invalid_argument);
}

TEST(Gae, MatchesBruteForce) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0), p(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> r(50), v(50);
    std::vector<std::uint8_t> d(50);
    std::vector<bool> db(50);
    for (int i = 0; i < 50; ++i) {
      r[i] = u(rng);
      v[i] = u(rng);
      db[i] = p(rng) < 0.1;
      d[i] = db[i];
    }
    const double boot = u(rng), gamma = 0.9 + 0.1 * p(rng), lambda = p(rng);
    const auto got = gae(r, v, d, boot, gamma, lambda);
    const auto ref = oracle::gae_brute(r, v, db, boot, gamma, lambda);
    for (int i = 0; i < 50; ++i) {
      EXPECT_NEAR(got.advantages[i], ref[i], 1e-12);
      EXPECT_NEAR(got.returns[i], ref[i] + v[i], 1e-12);
    }
  }
}

TEST(Ppo, AdvantageNormalizationKeepsArgmax) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(64);
    for (auto& x : a) x = u(rng) * (trial % 7 + 1);
    const auto b = normalize_advantages(a);
    EXPECT_EQ(std::max_element(a.begin(), a.end()) - a.begin(),
              std::max_element(b.begin(), b.end()) - b.begin());
    EXPECT_EQ(std::min_element(a.begin(), a.end()) - a.begin(),
              std::min_element(b.begin(), b.end()) - b.begin());
    double mean = 0.0, sq = 0.0;
    for (double x : b) mean += x / 64.0;
    for (double x : b) sq += (x - mean) * (x - mean) / 64.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
  }
}

namespace {

// Single-step bandit on a fixed observation: reward u_jerk + u_steer.
RolloutBatch bandit_batch(const Learner& l, int n, std::mt19937_64& rng) {
  RolloutBatch b;
  env::Observation obs = fixtures::random_observation(l.actor_net.spec().fov, rng);
  const auto shapes = l.actor_net.forward(l.actor, make_inputs(obs));
  for (int i = 0; i < n; ++i) {
    const auto s = sample_and_scale(to_beta_pair(shapes, 0), rng);
    b.observations.push_back(obs);
    b.u.push_back(s.u);
    b.logp.push_back(s.logp);
    b.rewards.push_back(s.u[0] + s.u[1]);
    b.values.push_back(0.0);
    b.done.push_back(1);
  }
  auto g = gae(b.rewards, b.values, b.done, 0.0, 0.99, 0.95);
  b.advantages = g.advantages;
  b.returns = g.returns;
  return b;
}

}  // namespace

TEST(Ppo, BanditUpdateMovesMeansTowardReward) {
  std::mt19937_64 rng(14);
  Learner l = Learner::create(fixtures::tiny_spec(HeadKind::BetaShapes),
                              fixtures::tiny_spec(HeadKind::Linear), 3);
  const auto batch = bandit_batch(l, 512, rng);
  const auto in = make_inputs(batch.observations.front());
  const auto before = to_beta_pair(l.actor_net.forward(l.actor, in), 0);
  PpoConfig cfg;
  cfg.minibatch_size = 128;
  cfg.epochs_per_update = 4;
  cfg.learning_rate = 1e-2;
  const auto d = ppo_update(l, batch, cfg, rng);
  ASSERT_FALSE(d.aborted);
  EXPECT_LT(d.initial_ratio_dev, 1e-12);
  const auto after = to_beta_pair(l.actor_net.forward(l.actor, in), 0);
  EXPECT_GT(beta_mean(after.alpha_j, after.beta_j), beta_mean(before.alpha_j, before.beta_j));
  EXPECT_GT(beta_mean(after.alpha_s, after.beta_s), beta_mean(before.alpha_s, before.beta_s));
}

TEST(Ppo, NonFiniteLossAbortsAndRestores) {
  std::mt19937_64 rng(15);
  Learner l = Learner::create(fixtures::tiny_spec(HeadKind::BetaShapes),
                              fixtures::tiny_spec(HeadKind::Linear), 4);
  auto batch = bandit_batch(l, 64, rng);
  batch.returns[3] = std::numeric_limits<double>::infinity();
  const Learner before = l;
  PpoConfig cfg;
  cfg.minibatch_size = 64;
  const auto d = ppo_update(l, batch, cfg, rng);
  EXPECT_TRUE(d.aborted);
  EXPECT_FALSE(d.reason.empty());
  EXPECT_TRUE(l.actor == before.actor);
  EXPECT_TRUE(l.critic == before.critic);
}

TEST(Ppo, RejectsInvalidBatch) {
  std::mt19937_64 rng(16);
  Learner l = Learner::create(fixtures::tiny_spec(HeadKind::BetaShapes),
                              fixtures::tiny_spec(HeadKind::Linear), 4);
  auto batch = bandit_batch(l, 8, rng);
  batch.u[0][1] = 1.0;
  EXPECT_THROW(ppo_update(l, batch, PpoConfig{}, rng), std::invalid_argument);
  batch = bandit_batch(l, 8, rng);
  batch.rewards.pop_back();
  EXPECT_THROW(ppo_update(l, batch, PpoConfig{}, rng), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Learner l = Learner::create(actor_spec(), critic_spec(), 9);
  const Checkpoint c = to_checkpoint(l, 4242);
  const auto path = (std::filesystem::temp_directory_path() / "densegap_ckpt_test.bin").string();
  save_checkpoint(c, path);
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  const Checkpoint back = load_checkpoint(path);
  EXPECT_TRUE(back == c);
  EXPECT_EQ(std::memcmp(back.actor.values.data(), c.actor.values.data(),
                        sizeof(double) * c.actor.values.size()), 0);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsDamage) {
  Learner l = Learner::create(fixtures::tiny_spec(HeadKind::BetaShapes),
                              fixtures::tiny_spec(HeadKind::Linear), 9);
  const std::string good = serialize_checkpoint(to_checkpoint(l, 1));
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, good.size() / 2, good.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(good.substr(0, cut)), CheckpointError) << cut;
  }
  std::string bumped = good;
  bumped[8] = 2;
  try {
    deserialize_checkpoint(bumped);
    FAIL() << "version bump accepted";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  std::string flipped = good;
  flipped[good.size() - 20] ^= 0x10;
  EXPECT_THROW(deserialize_checkpoint(flipped), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(good + "x"), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.bin"), CheckpointError);
}

namespace {

env::ScenarioConfig small_cfg() {
  env::ScenarioConfig cfg;
  cfg.lane_count = 2;
  cfg.n_vehicles = 10;
  cfg.fov = 10;
  return cfg;
}

class FaultyEnv final : public env::Environment {
 public:
  explicit FaultyEnv(int fail_after) : inner_(small_cfg()), fail_after_(fail_after) {}
  env::Observation reset(std::uint64_t seed) override { return inner_.reset(seed); }
  env::StepResult step(const env::EgoAction& a) override {
    if (++steps_ > fail_after_) throw std::runtime_error("simulated fault");
    return inner_.step(a);
  }
  int fov() const override { return inner_.fov(); }

 private:
  env::LaneChangeEnv inner_;
  int fail_after_;
  int steps_ = 0;
};

}  // namespace

TEST(Trainer, ZeroStepsReturnsInitialParameters) {
  TrainConfig cfg;
  cfg.seed = 5;
  const auto r = train([](int) { return std::make_unique<env::LaneChangeEnv>(small_cfg()); }, cfg);
  EXPECT_TRUE(r.curve.empty());
  EXPECT_EQ(r.env_steps, 0u);
  const auto fresh = Learner::create(actor_spec(10), critic_spec(10), 5);
  EXPECT_TRUE(r.learner.actor == fresh.actor);
}

TEST(Trainer, DeterministicCurve) {
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.num_envs = 2;
  cfg.total_steps = 1024;
  cfg.ppo.steps_per_update = 256;
  cfg.ppo.minibatch_size = 64;
  cfg.ppo.epochs_per_update = 2;
  auto factory = [](int) { return std::make_unique<env::LaneChangeEnv>(small_cfg()); };
  const auto a = train(factory, cfg), b = train(factory, cfg);
  ASSERT_EQ(a.curve.size(), 4u);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].env_steps, b.curve[i].env_steps);
    EXPECT_EQ(a.curve[i].actor_loss, b.curve[i].actor_loss);
    EXPECT_EQ(a.curve[i].critic_loss, b.curve[i].critic_loss);
    EXPECT_TRUE(a.curve[i].median_reward_last_10 == b.curve[i].median_reward_last_10 ||
                (std::isnan(a.curve[i].median_reward_last_10) &&
                 std::isnan(b.curve[i].median_reward_last_10)));
  }
  EXPECT_TRUE(a.learner.actor == b.learner.actor);
  EXPECT_EQ(a.env_steps, 1024u);
}

TEST(Trainer, EnvironmentFaultHaltsWithStatePreserved) {
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.num_envs = 1;
  cfg.total_steps = 1000;
  cfg.ppo.steps_per_update = 100;
  cfg.ppo.minibatch_size = 50;
  cfg.ppo.epochs_per_update = 1;
  const auto dir = std::filesystem::temp_directory_path();
  cfg.checkpoint_path = (dir / "densegap_fault.ckpt").string();
  cfg.curve_path = (dir / "densegap_fault.csv").string();
  const auto r = train([](int) { return std::make_unique<FaultyEnv>(250); }, cfg);
  EXPECT_TRUE(r.faulted);
  EXPECT_NE(r.fault.find("simulated fault"), std::string::npos);
  EXPECT_EQ(r.env_steps, 250u);
  EXPECT_EQ(r.curve.size(), 2u);
  const auto saved = load_checkpoint(cfg.checkpoint_path);
  EXPECT_TRUE(saved.actor == r.learner.actor);
  std::ifstream csv(cfg.curve_path);
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "update_index,env_steps,median_reward_last_10,actor_loss,critic_loss,entropy");
  std::filesystem::remove(cfg.checkpoint_path);
  std::filesystem::remove(cfg.curve_path);
}
