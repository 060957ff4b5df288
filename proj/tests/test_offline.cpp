#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "json.hpp"

#include "drnd/error.hpp"
#include "drnd/offline.hpp"
#include "test_util.hpp"

using namespace drnd;
using namespace drnd::offline;

namespace {

SacConfig small_config() {
  SacConfig c;
  c.batch_size = 64;
  c.hidden = 32;
  c.pretrain_epochs = 5;
  c.bonus_hidden = 32;
  c.bonus_output_dim = 16;
  c.iterations = 200;
  c.eval_every = 100;
  c.eval_episodes = 4;
  return c;
}

// log pi(a|s) for one coordinate, written out directly from the density of
// tanh(N(mean, std^2)).
double naive_logp(double mean, double log_std, double eps) {
  const double sd = std::exp(log_std);
  const double u = mean + sd * eps;
  const double gauss = -0.5 * ((u - mean) / sd) * ((u - mean) / sd) - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
  const double t = std::tanh(u);
  return gauss - std::log(1.0 - t * t);
}

SacNets tanh_nets(int d, std::uint64_t seed) {
  SacNets n;
  n.actor = mlp_init({{d, 6, 2 * d}, Activation::tanh, seed});
  n.q1 = mlp_init({{2 * d, 6, 1}, Activation::tanh, seed + 1});
  n.q2 = mlp_init({{2 * d, 6, 1}, Activation::tanh, seed + 2});
  n.q1_target = n.q1;
  n.q2_target = n.q2;
  n.log_temperature = std::log(0.3);
  return n;
}

}  // namespace

TEST(LineWalk, TransitionAndReward) {
  LineWalkSpec env;
  Vector s(1), a(1);
  s << 0.95;
  a << 1.0;
  EXPECT_DOUBLE_EQ(env.transition(s, a)(0), 1.0);
  a << 3.0;  // actions are clipped to [-1, 1] first
  s << 0.0;
  EXPECT_DOUBLE_EQ(env.transition(s, a)(0), 0.2);
  Vector at(1);
  at << 0.5;
  EXPECT_DOUBLE_EQ(env.reward(at), 1.0);
  at << 0.7;
  EXPECT_NEAR(env.reward(at), std::exp(-1.0), 1e-12);
}

TEST(OfflineDataset, RespectsBehaviourAndDynamics) {
  LineWalkSpec env;
  env.dim = 2;
  const auto ds = generate_offline_dataset(env, {}, 1500, 3);
  ASSERT_EQ(ds.size(), 1500u);
  EXPECT_GE(ds.actions.minCoeff(), -0.2);
  EXPECT_LE(ds.actions.maxCoeff(), 0.2);
  for (Eigen::Index k = 0; k < 1500; ++k) {
    const Vector next = env.transition(ds.states.col(k), ds.actions.col(k));
    EXPECT_EQ(next, Vector(ds.next_states.col(k)));
    EXPECT_DOUBLE_EQ(ds.rewards(k), env.reward(next));
    // Within an episode the next state feeds the next transition.
    if ((k + 1) % env.horizon != 0 && k + 1 < 1500) EXPECT_EQ(Vector(ds.states.col(k + 1)), next);
  }
  EXPECT_NO_THROW(ds.validate());
}

TEST(OfflineDataset, TooSmallIsRejected) {
  EXPECT_THROW(generate_offline_dataset({}, {}, 999, 0), ConfigError);
  BehaviorSpec bad{0.5, -0.5};
  EXPECT_THROW(generate_offline_dataset({}, bad, 1000, 0), ConfigError);
}

TEST(OfflineDataset, DeterministicInSeed) {
  const auto a = generate_offline_dataset({}, {}, 1000, 7);
  const auto b = generate_offline_dataset({}, {}, 1000, 7);
  const auto c = generate_offline_dataset({}, {}, 1000, 8);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_NE(a.actions, c.actions);
}

TEST(OfflineDataset, CsvRoundTripIsExact) {
  LineWalkSpec env;
  env.dim = 2;
  const auto ds = generate_offline_dataset(env, {}, 1000, 1);
  std::stringstream ss;
  write_dataset_csv(ss, ds);
  const auto back = read_dataset_csv(ss, env, {});
  EXPECT_EQ(back.states, ds.states);
  EXPECT_EQ(back.actions, ds.actions);
  EXPECT_EQ(back.rewards, ds.rewards);
  EXPECT_EQ(back.next_states, ds.next_states);
  EXPECT_EQ(back.dones, ds.dones);
}

TEST(OfflineDataset, CsvRejectsOutOfBoundsActions) {
  const auto ds = generate_offline_dataset({}, {}, 1000, 1);
  std::stringstream ss;
  write_dataset_csv(ss, ds);
  BehaviorSpec narrow{-0.1, 0.1};
  EXPECT_THROW(read_dataset_csv(ss, {}, narrow), ConfigError);
}

TEST(OfflineDataset, MetadataDescribesBehaviour) {
  const auto ds = generate_offline_dataset({}, {}, 1000, 5);
  const auto j = nlohmann::json::parse(dataset_metadata_json(ds));
  EXPECT_EQ(j.at("size").get<int>(), 1000);
  EXPECT_EQ(j.at("seed").get<int>(), 5);
  EXPECT_TRUE(j.contains("behavior"));
}

TEST(CriticTarget, HandExamples) {
  // 0 + 0.99 * (10 - 0 - 2 * 0.5) = 8.91
  EXPECT_NEAR(critic_target_value(0.0, false, 0.99, 10.0, 0.0, 0.0, 2.0, 0.5), 8.91, 1e-12);
  EXPECT_DOUBLE_EQ(critic_target_value(1.0, true, 0.99, 10.0, 0.5, -1.0, 2.0, 0.5), 1.0);
  // beta * logp enters with a minus sign.
  EXPECT_NEAR(critic_target_value(0.0, false, 1.0, 0.0, 0.5, -2.0, 0.0, 0.0), 1.0, 1e-12);
}

TEST(CriticTarget, MonotoneInPenalty) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const double r = rng.uniform(-1, 1), q = rng.uniform(-10, 10), logp = rng.uniform(-3, 3);
    const double beta = rng.uniform(0, 1), b = rng.uniform(0, 2);
    const double l1 = rng.uniform(0, 5), l2 = l1 + rng.uniform(0, 5);
    EXPECT_LE(critic_target_value(r, false, 0.99, q, beta, logp, l2, b),
              critic_target_value(r, false, 0.99, q, beta, logp, l1, b) + 1e-12);
    EXPECT_LE(critic_target_value(r, false, 0.99, q, beta, logp, l1, b + 0.1),
              critic_target_value(r, false, 0.99, q, beta, logp, l1, b) + 1e-12);
  }
}

TEST(CriticTarget, BatchMatchesScalarForm) {
  LineWalkSpec env;
  const auto ds = generate_offline_dataset(env, {}, 1000, 2);
  SacConfig cfg = small_config();
  const Drnd model(cfg.drnd_config(2), 4);
  const SacNets nets = make_sac_nets(1, 1, cfg, 4);
  Rng rng(9);
  const int b = 16;
  const Matrix ns = ds.next_states.leftCols(b);
  const Vector r = ds.rewards.head(b);
  std::vector<std::uint8_t> dones(b, 0);
  dones[3] = 1;
  const Matrix noise = testutil::random_matrix(rng, 1, b, 2.0);
  const Vector y = critic_target(nets, r, ns, dones, noise, &model, cfg);
  const PolicySample next = sample_policy(nets.actor, ns, noise);
  Matrix sa(2, b);
  sa << ns, next.actions;
  const Vector q1 = mlp_forward_batch(nets.q1_target, sa).row(0).transpose();
  const Vector q2 = mlp_forward_batch(nets.q2_target, sa).row(0).transpose();
  const Vector bonus = model.bonus_batch(sa, Exec::serial).total;
  for (int k = 0; k < b; ++k) {
    const double expect = critic_target_value(r(k), dones[k] != 0, cfg.gamma, std::min(q1(k), q2(k)),
                                              std::exp(nets.log_temperature), next.logp(k),
                                              cfg.lambda_critic, bonus(k));
    EXPECT_DOUBLE_EQ(y(k), expect);
  }
  EXPECT_DOUBLE_EQ(y(3), r(3));
}

TEST(Policy, LogProbMatchesDirectDensity) {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const int d = 1 + static_cast<int>(rng.index(3));
    const MlpParams actor = mlp_init({{d, 8, 2 * d}, Activation::relu, rng.next()});
    const Matrix s = testutil::random_matrix(rng, d, 5);
    const Matrix noise = testutil::random_matrix(rng, d, 5, 1.5);
    const PolicySample p = sample_policy(actor, s, noise);
    const Matrix out = mlp_forward_batch(actor, s);
    for (int k = 0; k < 5; ++k) {
      double lp = 0.0;
      for (int j = 0; j < d; ++j) {
        const double ls = kLogStdMin + 0.5 * (kLogStdMax - kLogStdMin) * (std::tanh(out(d + j, k)) + 1.0);
        lp += naive_logp(out(j, k), ls, noise(j, k));
        EXPECT_NEAR(p.actions(j, k), std::tanh(out(j, k) + std::exp(ls) * noise(j, k)), 1e-14);
      }
      EXPECT_NEAR(p.logp(k), lp, 1e-8 * std::max(1.0, std::abs(lp)));
    }
  }
}

TEST(Policy, LogStdStaysInRange) {
  Rng rng(4);
  MlpParams actor = mlp_init({{1, 4, 2}, Activation::relu, 1});
  for (auto& l : actor.layers) l.weight *= 1e3;  // saturate the raw log-std
  const Matrix s = testutil::random_matrix(rng, 1, 50);
  const Matrix zero = Matrix::Zero(1, 50);
  const PolicySample p = sample_policy(actor, s, zero);
  EXPECT_TRUE(p.logp.allFinite());
  EXPECT_LE(p.actions.cwiseAbs().maxCoeff(), 1.0);
}

TEST(ActorLoss, GradientMatchesFiniteDifferences) {
  Rng rng(31);
  for (int trial = 0; trial < 24; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(2));
    SacNets nets = tanh_nets(d, rng.next());
    DrndConfig dc;
    dc.input_dim = 2 * d;
    dc.output_dim = 4;
    dc.predictor_hidden = {6};
    dc.target_hidden = {6};
    dc.activation = Activation::tanh;
    dc.num_targets = 3;
    const Drnd model(dc, rng.next());
    SacConfig cfg;
    cfg.lambda_actor = trial % 3 == 0 ? 0.0 : rng.uniform(0.1, 5.0);
    const Drnd* bonus = trial % 4 == 1 ? nullptr : &model;
    const Matrix s = testutil::random_matrix(rng, d, 6);
    const Matrix noise = testutil::random_matrix(rng, d, 6);
    const ActorLoss l = actor_loss(nets, s, noise, bonus, cfg);
    const auto numeric = oracle::numeric_gradient(
        [&](const oracle::Vec& theta) {
          SacNets m = nets;
          unflatten(theta, m.actor.layers);
          return actor_loss(m, s, noise, bonus, cfg).loss;
        },
        flatten(nets.actor.layers));
    EXPECT_LT(oracle::relative_error(flatten(l.grads.layers), numeric), 1e-4) << "trial " << trial;
  }
}

TEST(ActorLoss, ZeroPenaltyIgnoresBonus) {
  SacNets nets = tanh_nets(1, 3);
  DrndConfig dc;
  const Drnd model(dc, 1);
  SacConfig cfg;
  cfg.lambda_actor = 0.0;
  Rng rng(2);
  const Matrix s = testutil::random_matrix(rng, 1, 8);
  const Matrix noise = testutil::random_matrix(rng, 1, 8);
  const ActorLoss with = actor_loss(nets, s, noise, &model, cfg);
  const ActorLoss without = actor_loss(nets, s, noise, nullptr, cfg);
  EXPECT_EQ(with.loss, without.loss);
  EXPECT_EQ(flatten(with.grads.layers), flatten(without.grads.layers));
}

TEST(Pretrain, LowersExpectedLossAndZeroEpochsIsNoOp) {
  const auto ds = generate_offline_dataset({}, {}, 1000, 1);
  SacConfig cfg = small_config();
  Drnd model(cfg.drnd_config(2), 3);
  const auto before = drnd::fingerprint(model.predictor().net);
  Rng rng(1);
  SacConfig none = cfg;
  none.pretrain_epochs = 0;
  const auto r0 = pretrain_drnd(model, ds, none, rng);
  EXPECT_EQ(r0.expected_loss.size(), 1u);
  EXPECT_EQ(drnd::fingerprint(model.predictor().net), before);
  const auto r = pretrain_drnd(model, ds, cfg, rng);
  ASSERT_EQ(r.expected_loss.size(), 6u);
  EXPECT_LT(r.expected_loss.back(), r.expected_loss.front());
}

TEST(TrainOffline, DeterministicAndDrndFrozen) {
  const auto ds = generate_offline_dataset({}, {}, 1000, 1);
  const SacConfig cfg = small_config();
  const EvalReport a = train_offline(cfg, ds, 5);
  const EvalReport b = train_offline(cfg, ds, 5);
  EXPECT_EQ(a.mean_return, b.mean_return);
  EXPECT_EQ(a.policy_bonus_mean, b.policy_bonus_mean);
  EXPECT_EQ(a.final_temperature, b.final_temperature);
  EXPECT_EQ(a.drnd_fingerprint_before, a.drnd_fingerprint_after);
  ASSERT_EQ(a.curve.size(), 2u);
  EXPECT_EQ(a.curve.back().iteration, 200);
  EXPECT_EQ(a.pretrain_loss.size(), 6u);
}

TEST(TrainOffline, LargePenaltyStaysInSupport) {
  const auto ds = generate_offline_dataset({}, {}, 2000, 2);
  SacConfig cfg = small_config();
  cfg.pretrain_epochs = 30;
  cfg.iterations = 600;
  cfg.eval_every = 600;
  cfg.lambda_actor = cfg.lambda_critic = 1e3;
  const EvalReport r = train_offline(cfg, ds, 1);
  EXPECT_LE(r.bonus_ratio(), 2.0) << r.policy_bonus_mean << " vs " << r.dataset_bonus_mean;
}

TEST(TrainOffline, NoPenaltyWithFullCoverageLearns) {
  BehaviorSpec wide{-1.0, 1.0};
  const auto ds = generate_offline_dataset({}, wide, 2000, 3);
  SacConfig cfg = small_config();
  cfg.lambda_actor = cfg.lambda_critic = 0.0;
  cfg.iterations = 1000;
  cfg.eval_every = 1000;
  cfg.eval_episodes = 10;
  const EvalReport r = train_offline(cfg, ds, 2);
  EXPECT_GT(r.mean_return, r.behavior_return);
}
