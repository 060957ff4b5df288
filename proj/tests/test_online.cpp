#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "drnd/error.hpp"
#include "drnd/online.hpp"
#include "test_util.hpp"

using namespace drnd;
using namespace drnd::online;

TEST(DeepSea, AllRightPathIsTheOnlyReward) {
  ToyEnv env({EnvKind::deep_sea, 6, ObsEncoding::one_hot});
  EXPECT_EQ(env.obs_dim(), 7 * 6);
  env.reset();
  double ret = 0.0;
  StepResult r;
  for (int t = 0; t < 6; ++t) {
    r = env.step(1);
    ret += r.reward;
  }
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.goal);
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_NEAR(ret, 1.0 - 5 * 0.01 / 6, 1e-12);
  EXPECT_THROW(env.step(0), UsageError);
}

TEST(DeepSea, LeftPathPaysNothing) {
  ToyEnv env({EnvKind::deep_sea, 5, ObsEncoding::coordinates});
  const Vector o = env.reset();
  EXPECT_EQ(o.size(), 2);
  double ret = 0.0;
  StepResult r;
  for (int t = 0; t < 5; ++t) {
    r = env.step(0);
    ret += r.reward;
  }
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.goal);
  EXPECT_EQ(ret, 0.0);
  EXPECT_NEAR(r.observation(0), 1.0, 1e-12);
  EXPECT_NEAR(r.observation(1), 0.0, 1e-12);
}

TEST(DeepSea, OneLeftMoveMissesTheGoal) {
  ToyEnv env({EnvKind::deep_sea, 4});
  env.reset();
  StepResult r = env.step(1);
  r = env.step(0);
  for (int t = 2; t < 4; ++t) r = env.step(1);
  EXPECT_FALSE(r.goal);
  // In column 0 a left move is clamped and costs nothing.
  env.reset();
  r = env.step(0);
  for (int t = 1; t < 4; ++t) r = env.step(1);
  EXPECT_TRUE(r.goal);
  EXPECT_THROW(ToyEnv({EnvKind::deep_sea, 4}).step(2), UsageError);
}

TEST(SparseChain, GoalAndHorizon) {
  ToyEnv env({EnvKind::sparse_chain, 5});
  EXPECT_EQ(env.horizon(), 10);
  env.reset();
  StepResult r;
  for (int t = 0; t < 4; ++t) r = env.step(1);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward, 1.0);
  env.reset();
  for (int t = 0; t < 10; ++t) r = env.step(0);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_THROW(EnvSpec({EnvKind::sparse_chain, 1}).validate(), ConfigError);
}

TEST(Gae, TwoStepHandExample) {
  // delta_1 = 1 - 0.5 = 0.5 (terminal), delta_0 = 0.99 * 0.5 - 0.5 = -0.005,
  // A_0 = -0.005 + 0.99 * 0.95 * 0.5 = 0.46525.
  const std::vector<double> r{0.0, 1.0}, v{0.5, 0.5};
  const std::vector<std::uint8_t> d{0, 1};
  const Advantages a = gae(r, v, d, 123.0, 0.99, 0.95);
  EXPECT_NEAR(a.advantages[1], 0.5, 1e-12);
  EXPECT_NEAR(a.advantages[0], 0.46525, 1e-12);
  EXPECT_NEAR(a.returns[0], 0.96525, 1e-12);
  EXPECT_NEAR(a.returns[1], 1.0, 1e-12);
}

TEST(Gae, MatchesForwardSumOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int t_max = 1 + static_cast<int>(rng.index(20));
    std::vector<double> r(t_max), v(t_max);
    std::vector<std::uint8_t> d(t_max);
    std::vector<int> di(t_max);
    for (int t = 0; t < t_max; ++t) {
      r[t] = rng.normal();
      v[t] = rng.normal();
      d[t] = rng.uniform() < 0.2;
      di[t] = d[t];
    }
    const double boot = rng.normal(), gamma = rng.uniform(0.5, 0.999), lambda = rng.uniform();
    const Advantages a = gae(r, v, d, boot, gamma, lambda);
    const oracle::Gae o = oracle::gae_forward_sum(r, v, di, boot, gamma, lambda);
    for (int t = 0; t < t_max; ++t) {
      EXPECT_NEAR(a.advantages[t], o.advantages[t], 1e-10);
      EXPECT_NEAR(a.returns[t], o.returns[t], 1e-10);
    }
  }
}

TEST(Gae, LengthMismatch) {
  const std::vector<double> r{1.0, 2.0}, v{1.0};
  const std::vector<std::uint8_t> d{0, 0};
  EXPECT_THROW(gae(r, v, d, 0.0, 0.99, 0.95), ShapeError);
}

TEST(Surrogate, ClipRule) {
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.3, 2.0, 0.1), 1.1 * 2.0);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.7, -2.0, 0.1), 0.9 * -2.0);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.7, 2.0, 0.1), 0.7 * 2.0);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.0, 3.0, 0.1), 3.0);
  EXPECT_EQ(clipped_surrogate_grad(1.3, 2.0, 0.1), 0.0);
  EXPECT_EQ(clipped_surrogate_grad(1.05, 2.0, 0.1), 2.0);
  EXPECT_EQ(clipped_surrogate_grad(1.3, -2.0, 0.1), -2.0);
}

TEST(Surrogate, GradientMatchesFiniteDifference) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double ratio = rng.uniform(0.5, 1.5), a = rng.normal();
    if (std::abs(ratio - 0.9) < 1e-3 || std::abs(ratio - 1.1) < 1e-3) continue;
    const double h = 1e-7;
    const double fd = (clipped_surrogate(ratio + h, a, 0.1) - clipped_surrogate(ratio - h, a, 0.1)) / (2 * h);
    EXPECT_NEAR(clipped_surrogate_grad(ratio, a, 0.1), fd, 1e-6);
  }
}

TEST(Softmax, ColumnsSumToOne) {
  Rng rng(5);
  const Matrix p = softmax_columns(testutil::random_matrix(rng, 3, 10, 50.0));
  for (int c = 0; c < 10; ++c) EXPECT_NEAR(p.col(c).sum(), 1.0, 1e-12);
  EXPECT_TRUE((p.array() >= 0.0).all());
}

namespace {

PpoBatch random_batch(Rng& rng, int obs, int b) {
  PpoBatch batch;
  batch.obs = testutil::random_matrix(rng, obs, b);
  for (int k = 0; k < b; ++k) {
    batch.actions.push_back(static_cast<int>(rng.index(2)));
    batch.old_logp.push_back(std::log(rng.uniform(0.3, 0.7)));
    batch.advantages.push_back(rng.normal());
  }
  return batch;
}

}  // namespace

TEST(PpoLoss, OldEqualsNewGivesMeanAdvantage) {
  Rng rng(6);
  const MlpParams pol = mlp_init({{3, 8, 2}, Activation::tanh, 2});
  PpoBatch b = random_batch(rng, 3, 12);
  const Matrix logits = mlp_forward_batch(pol, b.obs);
  const Matrix p = softmax_columns(logits);
  double mean_a = 0.0;
  for (int k = 0; k < 12; ++k) {
    b.old_logp[k] = std::log(p(b.actions[k], k));
    mean_a += b.advantages[k] / 12.0;
  }
  EXPECT_NEAR(ppo_policy_loss(pol, b, 0.1, 0.0).surrogate, mean_a, 1e-12);
}

TEST(PpoLoss, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const MlpParams pol = mlp_init({{3, 6, 2}, Activation::tanh, rng.next()});
    const PpoBatch b = random_batch(rng, 3, 8);
    const PpoLoss l = ppo_policy_loss(pol, b, 0.2, 0.05);
    const auto numeric = oracle::numeric_gradient(
        [&](const oracle::Vec& theta) {
          MlpParams q = pol;
          unflatten(theta, q.layers);
          return ppo_policy_loss(q, b, 0.2, 0.05).loss;
        },
        flatten(pol.layers));
    EXPECT_LT(oracle::relative_error(flatten(l.grads.layers), numeric), 1e-4) << "trial " << trial;
  }
}

TEST(ValueLoss, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  const MlpParams v = mlp_init({{3, 6, 1}, Activation::tanh, 3});
  const Matrix obs = testutil::random_matrix(rng, 3, 9);
  std::vector<double> ret(9);
  for (auto& x : ret) x = rng.normal();
  const auto [loss, grads] = value_loss(v, obs, ret);
  const auto numeric = oracle::numeric_gradient(
      [&](const oracle::Vec& theta) {
        MlpParams q = v;
        unflatten(theta, q.layers);
        return value_loss(q, obs, ret).first;
      },
      flatten(v.layers));
  EXPECT_LT(oracle::relative_error(flatten(grads.layers), numeric), 1e-4);
  const Matrix pred = mlp_forward_batch(v, obs);
  double manual = 0.0;
  for (int k = 0; k < 9; ++k) manual += 0.5 * (pred(0, k) - ret[k]) * (pred(0, k) - ret[k]) / 9.0;
  EXPECT_NEAR(loss, manual, 1e-12);
}

TEST(PpoConfig, MethodReductions) {
  PpoConfig c;
  c.method = BonusMethod::rnd;
  EXPECT_EQ(c.drnd_config().num_targets, 1);
  EXPECT_EQ(c.drnd_config().bonus.alpha, 1.0);
  c.method = BonusMethod::cfn;
  EXPECT_EQ(c.drnd_config().mode, TargetMode::rademacher);
  EXPECT_EQ(c.drnd_config().bonus.alpha, 0.0);
  c.method = BonusMethod::drnd;
  EXPECT_EQ(c.drnd_config().num_targets, 10);
  EXPECT_EQ(c.drnd_config().bonus.alpha, 0.9);
  EXPECT_EQ(c.gamma, 0.99);
  EXPECT_EQ(c.clip_eps, 0.1);
  EXPECT_EQ(c.gae_lambda, 0.95);
}

TEST(PpoConfig, Validation) {
  PpoConfig c;
  c.clip_eps = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PpoConfig{};
  c.alpha = 2.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PpoConfig{};
  c.intrinsic_coef = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(bonus_method_from_string("icm"), ConfigError);
}

namespace {

PpoConfig short_run(BonusMethod m) {
  PpoConfig c;
  c.env.size = 5;
  c.method = m;
  c.num_envs = 4;
  c.max_iterations = 6;
  c.stop_when_solved = false;
  return c;
}

}  // namespace

TEST(Rollout, DeterministicInSeed) {
  const auto a = rollout_train(short_run(BonusMethod::drnd), 3);
  const auto b = rollout_train(short_run(BonusMethod::drnd), 3);
  const auto c = rollout_train(short_run(BonusMethod::drnd), 4);
  EXPECT_EQ(a.action_digest, b.action_digest);
  EXPECT_NE(a.action_digest, c.action_digest);
  ASSERT_EQ(a.iterations.size(), 6u);
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    EXPECT_EQ(a.iterations[i].iteration, static_cast<int>(i));
    EXPECT_EQ(a.iterations[i].policy_loss, b.iterations[i].policy_loss);
  }
}

// lambda = 0 must reproduce the no-bonus run bit for bit even though the
// bonus is still computed and the DRND predictor still trains.
TEST(Rollout, ZeroIntrinsicCoefficientIsIsolated) {
  for (BonusMethod m : {BonusMethod::drnd, BonusMethod::rnd, BonusMethod::cfn}) {
    PpoConfig with = short_run(m);
    with.intrinsic_coef = 0.0;
    const auto a = rollout_train(with, 11);
    const auto b = rollout_train(short_run(BonusMethod::none), 11);
    EXPECT_EQ(a.action_digest, b.action_digest) << to_string(m);
    for (std::size_t i = 0; i < a.iterations.size(); ++i) {
      EXPECT_EQ(a.iterations[i].policy_loss, b.iterations[i].policy_loss);
      EXPECT_EQ(a.iterations[i].value_loss_ext, b.iterations[i].value_loss_ext);
    }
    EXPECT_GT(a.iterations.back().intrinsic_mean, 0.0);
  }
}

TEST(Rollout, CurveIsConsistent) {
  const auto c = rollout_train(short_run(BonusMethod::drnd), 5);
  int total = 0;
  for (const auto& it : c.iterations) {
    total += it.episodes;
    EXPECT_EQ(it.episodes_total, total);
    EXPECT_LE(it.goals, it.episodes);
    EXPECT_TRUE(std::isfinite(it.policy_loss));
  }
  EXPECT_EQ(c.episodes_total, total);
}

TEST(Rollout, IterationFitsDeskBudget) {
  PpoConfig c;
  c.max_iterations = 5;
  c.stop_when_solved = false;
  const auto t0 = std::chrono::steady_clock::now();
  const auto curve = rollout_train(c, 0);
  const double per_iter =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / curve.iterations.size();
  EXPECT_LT(per_iter, 1.0);
}
