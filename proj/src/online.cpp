#include "drnd/online.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drnd/error.hpp"
#include "drnd/rng.hpp"

namespace drnd::online {

std::string to_string(EnvKind k) { return k == EnvKind::deep_sea ? "deep_sea" : "sparse_chain"; }

EnvKind env_kind_from_string(const std::string& name) {
  if (name == "deep_sea") return EnvKind::deep_sea;
  if (name == "sparse_chain") return EnvKind::sparse_chain;
  throw ConfigError("unknown env kind '" + name + "'");
}

std::string to_string(ObsEncoding e) { return e == ObsEncoding::one_hot ? "one_hot" : "coordinates"; }

ObsEncoding obs_encoding_from_string(const std::string& name) {
  if (name == "one_hot") return ObsEncoding::one_hot;
  if (name == "coordinates") return ObsEncoding::coordinates;
  throw ConfigError("unknown observation encoding '" + name + "'");
}

void EnvSpec::validate() const {
  if (size < 2) throw ConfigError("env size must be >= 2, got " + std::to_string(size));
}

// ---------------------------------------------------------------------------
// ToyEnv

ToyEnv::ToyEnv(EnvSpec spec) : spec_(spec) {
  spec_.validate();
  reset();
}

Vector ToyEnv::reset() {
  row_ = 0;
  col_ = 0;
  t_ = 0;
  done_ = false;
  return observation();
}

int ToyEnv::horizon() const { return spec_.kind == EnvKind::deep_sea ? spec_.size : 2 * spec_.size; }

int ToyEnv::obs_dim() const {
  if (spec_.encoding == ObsEncoding::coordinates) return spec_.kind == EnvKind::deep_sea ? 2 : 1;
  return spec_.kind == EnvKind::deep_sea ? (spec_.size + 1) * spec_.size : spec_.size;
}

Vector ToyEnv::observation() const {
  const int n = spec_.size;
  if (spec_.encoding == ObsEncoding::coordinates) {
    if (spec_.kind == EnvKind::deep_sea) {
      Vector v(2);
      v << static_cast<double>(row_) / n, static_cast<double>(col_) / (n - 1);
      return v;
    }
    Vector v(1);
    v << static_cast<double>(col_) / (n - 1);
    return v;
  }
  Vector v = Vector::Zero(obs_dim());
  v(spec_.kind == EnvKind::deep_sea ? row_ * n + col_ : col_) = 1.0;
  return v;
}

StepResult ToyEnv::step(int action) {
  if (done_) throw UsageError("env step after the episode ended; call reset()");
  if (action != 0 && action != 1) throw UsageError("invalid action " + std::to_string(action));
  const int n = spec_.size;
  StepResult r;
  ++t_;
  if (spec_.kind == EnvKind::deep_sea) {
    col_ = action == 1 ? std::min(col_ + 1, n - 1) : std::max(col_ - 1, 0);
    ++row_;
    if (action == 1) r.reward = -0.01 / n;
    if (row_ == n) {
      done_ = true;
      if (action == 1 && col_ == n - 1) {
        r.reward = 1.0;
        r.goal = true;
      }
    }
  } else {
    col_ = action == 1 ? col_ + 1 : std::max(col_ - 1, 0);
    if (col_ == n - 1) {
      r.reward = 1.0;
      r.goal = true;
      done_ = true;
    } else if (t_ >= horizon()) {
      done_ = true;
    }
  }
  r.done = done_;
  r.observation = observation();
  return r;
}

// ---------------------------------------------------------------------------
// Advantages and losses

Advantages gae(std::span<const double> rewards, std::span<const double> values,
               std::span<const std::uint8_t> dones, double bootstrap, double gamma, double lambda) {
  if (values.size() != rewards.size() || dones.size() != rewards.size()) {
    throw ShapeError("gae: rewards/values/dones lengths differ (" + std::to_string(rewards.size()) + ", " +
                     std::to_string(values.size()) + ", " + std::to_string(dones.size()) + ")");
  }
  const std::size_t n = rewards.size();
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_value = bootstrap;
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * live * next_value - values[i];
    running = delta + gamma * lambda * live * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
    next_value = values[i];
  }
  return out;
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_surrogate_grad(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

std::string to_string(BonusMethod m) {
  switch (m) {
    case BonusMethod::drnd: return "drnd";
    case BonusMethod::rnd: return "rnd";
    case BonusMethod::cfn: return "cfn";
    case BonusMethod::none: return "none";
  }
  return "unknown";
}

BonusMethod bonus_method_from_string(const std::string& name) {
  if (name == "drnd") return BonusMethod::drnd;
  if (name == "rnd") return BonusMethod::rnd;
  if (name == "cfn") return BonusMethod::cfn;
  if (name == "none") return BonusMethod::none;
  throw ConfigError("unknown bonus method '" + name + "'");
}

void PpoConfig::validate() const {
  env.validate();
  if (num_envs < 1) throw ConfigError("num_envs must be >= 1");
  if (rollout_steps < 0) throw ConfigError("rollout_steps must be >= 0");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(gamma_int >= 0.0 && gamma_int < 1.0)) throw ConfigError("gamma_int must lie in [0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0, 1]");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must lie in (0, 1)");
  if (epochs < 1 || minibatches < 1) throw ConfigError("epochs and minibatches must be >= 1");
  if (entropy_coef < 0.0) throw ConfigError("entropy_coef must be >= 0");
  if (intrinsic_coef < 0.0) throw ConfigError("intrinsic_coef must be >= 0");
  if (!(policy_lr > 0.0 && critic_lr > 0.0 && drnd_lr > 0.0)) throw ConfigError("learning rates must be > 0");
  if (hidden < 1 || bonus_output_dim < 1) throw ConfigError("hidden and bonus_output_dim must be >= 1");
  if (num_targets < 1) throw ConfigError("num_targets must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (distill_epochs < 0) throw ConfigError("distill_epochs must be >= 0");
  if (max_iterations < 1 || max_episodes < 1) throw ConfigError("max_iterations and max_episodes must be >= 1");
  if (minibatches > num_envs * steps_per_env()) throw ConfigError("more minibatches than transitions per iteration");
}

int PpoConfig::steps_per_env() const { return rollout_steps > 0 ? rollout_steps : ToyEnv(env).horizon(); }

DrndConfig PpoConfig::drnd_config() const {
  DrndConfig c;
  c.input_dim = ToyEnv(env).obs_dim();
  c.output_dim = bonus_output_dim;
  c.predictor_hidden = {hidden, hidden};
  c.target_hidden = {hidden};
  c.activation = Activation::relu;
  c.num_targets = num_targets;
  c.bonus.alpha = alpha;
  c.bonus.lambda = intrinsic_coef;
  c.adam.lr = drnd_lr;
  c.normalize_inputs = normalize_bonus_inputs;
  if (method == BonusMethod::rnd) {
    c.num_targets = 1;
    c.bonus.alpha = 1.0;
  } else if (method == BonusMethod::cfn) {
    c.num_targets = 2;
    c.mode = TargetMode::rademacher;
    c.bonus.alpha = 0.0;
  }
  return c;
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    const double m = p.col(k).maxCoeff();
    p.col(k) = (p.col(k).array() - m).exp().matrix();
    p.col(k) /= p.col(k).sum();
  }
  return p;
}

namespace {

Matrix log_softmax_columns(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    const double m = out.col(k).maxCoeff();
    const double lse = m + std::log((out.col(k).array() - m).exp().sum());
    out.col(k).array() -= lse;
  }
  return out;
}

}  // namespace

PpoLoss ppo_policy_loss(const MlpParams& policy, const PpoBatch& batch, double clip_eps,
                        double entropy_coef) {
  const auto b = static_cast<Eigen::Index>(batch.actions.size());
  if (b == 0 || batch.obs.cols() != b || static_cast<Eigen::Index>(batch.old_logp.size()) != b ||
      static_cast<Eigen::Index>(batch.advantages.size()) != b) {
    throw ShapeError("ppo batch fields disagree on length");
  }
  ForwardCache cache;
  const Matrix logits = mlp_forward_batch(policy, batch.obs, &cache);
  const Matrix logp = log_softmax_columns(logits);
  const Matrix p = logp.array().exp().matrix();
  Matrix upstream(logits.rows(), b);
  PpoLoss out;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const int a = batch.actions[static_cast<std::size_t>(k)];
    if (a < 0 || a >= logits.rows()) throw ShapeError("ppo batch action out of range");
    const double adv = batch.advantages[static_cast<std::size_t>(k)];
    const double ratio = std::exp(logp(a, k) - batch.old_logp[static_cast<std::size_t>(k)]);
    out.surrogate += clipped_surrogate(ratio, adv, clip_eps) * inv_b;
    double h = 0.0;
    for (Eigen::Index j = 0; j < logits.rows(); ++j) h -= p(j, k) * logp(j, k);
    out.entropy += h * inv_b;
    // d surrogate / d logp(a) = grad_ratio * ratio
    const double g = clipped_surrogate_grad(ratio, adv, clip_eps) * ratio;
    for (Eigen::Index j = 0; j < logits.rows(); ++j) {
      const double dlogp = (j == a ? 1.0 : 0.0) - p(j, k);
      const double dent = -p(j, k) * (logp(j, k) + h);
      upstream(j, k) = -inv_b * (g * dlogp + entropy_coef * dent);
    }
  }
  out.loss = -out.surrogate - entropy_coef * out.entropy;
  if (!std::isfinite(out.loss)) throw NumericError("ppo: non-finite policy loss");
  out.grads = mlp_backward_batch(policy, cache, upstream).grads;
  return out;
}

std::pair<double, MlpGrads> value_loss(const MlpParams& critic, const Matrix& obs,
                                       std::span<const double> returns) {
  if (static_cast<Eigen::Index>(returns.size()) != obs.cols() || returns.empty()) {
    throw ShapeError("value_loss: returns do not match the batch");
  }
  ForwardCache cache;
  const Matrix v = mlp_forward_batch(critic, obs, &cache);
  const double inv_b = 1.0 / static_cast<double>(returns.size());
  Matrix upstream(1, obs.cols());
  double loss = 0.0;
  for (Eigen::Index k = 0; k < obs.cols(); ++k) {
    const double d = v(0, k) - returns[static_cast<std::size_t>(k)];
    loss += 0.5 * d * d * inv_b;
    upstream(0, k) = d * inv_b;
  }
  if (!std::isfinite(loss)) throw NumericError("ppo: non-finite value loss");
  return {loss, mlp_backward_batch(critic, cache, upstream).grads};
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

Policy make_policy(int obs_dim, const PpoConfig& cfg, std::uint64_t seed) {
  MlpSpec spec{{obs_dim, cfg.hidden, cfg.hidden, 2}, Activation::relu, seed};
  Policy p{mlp_init(spec), {}};
  // Small output layer so the initial policy is close to uniform.
  p.net.layers.back().weight *= 0.01;
  p.net.layers.back().bias.setZero();
  p.optimizer = AdamState(p.net, AdamConfig{.lr = cfg.policy_lr});
  return p;
}

Critic make_critic(int obs_dim, const PpoConfig& cfg, std::uint64_t seed) {
  MlpSpec spec{{obs_dim, cfg.hidden, cfg.hidden, 1}, Activation::relu, seed};
  Critic c{mlp_init(spec), {}};
  c.optimizer = AdamState(c.net, AdamConfig{.lr = cfg.critic_lr});
  return c;
}

Matrix gather(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t q = 0; q < idx.size(); ++q) out.col(static_cast<Eigen::Index>(q)) = m.col(static_cast<Eigen::Index>(idx[q]));
  return out;
}

template <class T>
std::vector<T> gather(const std::vector<T>& v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

TrainingCurve rollout_train(const PpoConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int n_envs = cfg.num_envs;
  const int steps = cfg.steps_per_env();
  const std::size_t batch = static_cast<std::size_t>(n_envs) * static_cast<std::size_t>(steps);

  std::vector<ToyEnv> envs(static_cast<std::size_t>(n_envs), ToyEnv(cfg.env));
  const int obs_dim = envs.front().obs_dim();

  Policy policy = make_policy(obs_dim, cfg, derive_seed(seed, stream::kPolicy));
  Critic critic_ext = make_critic(obs_dim, cfg, derive_seed(seed, stream::kCritic));
  std::optional<Critic> critic_int;
  std::optional<Drnd> bonus_model;
  std::optional<RunningNormalizer> reward_norm;
  if (cfg.intrinsic_enabled()) {
    critic_int = make_critic(obs_dim, cfg, derive_seed(derive_seed(seed, stream::kCritic), 1));
    bonus_model.emplace(cfg.drnd_config(), seed);
    reward_norm.emplace(cfg.gamma_int, static_cast<std::size_t>(n_envs));
  }
  Rng action_rng(derive_seed(seed, stream::kActions));
  Rng minibatch_rng(derive_seed(seed, stream::kMinibatch));
  Rng distill_rng(derive_seed(seed, stream::kDistill));

  TrainingCurve curve;
  std::uint64_t digest = splitmix64(seed);
  std::vector<Vector> current(static_cast<std::size_t>(n_envs));
  for (int e = 0; e < n_envs; ++e) current[static_cast<std::size_t>(e)] = envs[static_cast<std::size_t>(e)].reset();
  std::vector<double> episode_return(static_cast<std::size_t>(n_envs), 0.0);

  // Column layout: env-major, column = e * steps + t.
  auto col = [steps](int e, int t) { return static_cast<Eigen::Index>(e) * steps + t; };

  for (int it = 0; it < cfg.max_iterations; ++it) {
    Matrix obs(obs_dim, static_cast<Eigen::Index>(batch));
    Matrix next_obs(obs_dim, static_cast<Eigen::Index>(batch));
    std::vector<int> actions(batch);
    std::vector<double> old_logp(batch);
    std::vector<double> r_ext(batch);
    std::vector<std::uint8_t> dones(batch);
    IterationStats stats;
    stats.iteration = it;
    double return_sum = 0.0;

    for (int t = 0; t < steps; ++t) {
      Matrix step_obs(obs_dim, n_envs);
      for (int e = 0; e < n_envs; ++e) step_obs.col(e) = current[static_cast<std::size_t>(e)];
      const Matrix logp = log_softmax_columns(mlp_forward_batch(policy.net, step_obs));
      for (int e = 0; e < n_envs; ++e) {
        const auto ue = static_cast<std::size_t>(e);
        const double u = action_rng.uniform();
        const int a = u < std::exp(logp(0, e)) ? 0 : 1;
        digest = splitmix64(digest ^ static_cast<std::uint64_t>(a + 1));
        const StepResult sr = envs[ue].step(a);
        const auto c = static_cast<std::size_t>(col(e, t));
        obs.col(col(e, t)) = current[ue];
        next_obs.col(col(e, t)) = sr.observation;
        actions[c] = a;
        old_logp[c] = logp(a, e);
        r_ext[c] = sr.reward;
        dones[c] = sr.done ? 1 : 0;
        episode_return[ue] += sr.reward;
        if (sr.done) {
          ++stats.episodes;
          if (sr.goal) ++stats.goals;
          return_sum += episode_return[ue];
          episode_return[ue] = 0.0;
          current[ue] = envs[ue].reset();
        } else {
          current[ue] = sr.observation;
        }
      }
    }
    curve.episodes_total += stats.episodes;
    stats.episodes_total = curve.episodes_total;
    stats.mean_return = stats.episodes > 0 ? return_sum / stats.episodes : 0.0;

    // Values and bootstraps with the pre-update critics.
    Matrix last_obs(obs_dim, n_envs);
    for (int e = 0; e < n_envs; ++e) last_obs.col(e) = current[static_cast<std::size_t>(e)];
    const Matrix v_ext = mlp_forward_batch(critic_ext.net, obs);
    const Matrix boot_ext = mlp_forward_batch(critic_ext.net, last_obs);

    std::vector<double> adv(batch), ret_ext(batch), ret_int(batch, 0.0);
    for (int e = 0; e < n_envs; ++e) {
      const auto off = static_cast<std::size_t>(col(e, 0));
      const auto len = static_cast<std::size_t>(steps);
      std::vector<double> ve(v_ext.data() + off, v_ext.data() + off + len);
      // A transition whose successor was a reset never bootstraps, so the
      // bootstrap only matters when the segment ends mid-episode.
      const Advantages ae = gae(std::span(r_ext).subspan(off, len), ve, std::span(dones).subspan(off, len),
                                boot_ext(0, e), cfg.gamma, cfg.gae_lambda);
      std::copy(ae.advantages.begin(), ae.advantages.end(), adv.begin() + static_cast<std::ptrdiff_t>(off));
      std::copy(ae.returns.begin(), ae.returns.end(), ret_ext.begin() + static_cast<std::ptrdiff_t>(off));
    }

    if (cfg.intrinsic_enabled()) {
      Drnd& model = *bonus_model;
      if (cfg.normalize_bonus_inputs) model.input_normalizer().update(next_obs);
      const BonusBatch bonus = model.bonus_batch(next_obs, Exec::serial);
      double s = 0.0, ss = 0.0;
      for (Eigen::Index k = 0; k < bonus.total.size(); ++k) {
        s += bonus.total(k);
        ss += bonus.total(k) * bonus.total(k);
      }
      stats.intrinsic_mean = s / static_cast<double>(batch);
      stats.intrinsic_std = std::sqrt(std::max(ss / static_cast<double>(batch) - stats.intrinsic_mean * stats.intrinsic_mean, 0.0));
      std::vector<std::vector<double>> raw(static_cast<std::size_t>(n_envs));
      for (int e = 0; e < n_envs; ++e) {
        for (int t = 0; t < steps; ++t) raw[static_cast<std::size_t>(e)].push_back(bonus.total(col(e, t)));
      }
      const auto normed = reward_norm->normalize_streams(raw);
      const Matrix v_int = mlp_forward_batch(critic_int->net, obs);
      const Matrix boot_int = mlp_forward_batch(critic_int->net, last_obs);
      for (int e = 0; e < n_envs; ++e) {
        const auto off = static_cast<std::size_t>(col(e, 0));
        const auto len = static_cast<std::size_t>(steps);
        std::vector<double> vi(v_int.data() + off, v_int.data() + off + len);
        const Advantages ai = gae(normed[static_cast<std::size_t>(e)], vi, std::span(dones).subspan(off, len),
                                  boot_int(0, e), cfg.gamma_int, cfg.gae_lambda);
        for (std::size_t t = 0; t < len; ++t) {
          adv[off + t] = adv[off + t] + cfg.intrinsic_coef * ai.advantages[t];
          ret_int[off + t] = ai.returns[t];
        }
      }
    }

    // Per-batch normalization of the combined advantage.
    {
      const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(batch);
      double var = 0.0;
      for (double a : adv) var += (a - mean) * (a - mean);
      const double sd = std::sqrt(var / static_cast<double>(batch));
      for (double& a : adv) a = (a - mean) / (sd + 1e-8);
    }

    std::vector<std::size_t> order(batch);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t mb = batch / static_cast<std::size_t>(cfg.minibatches);
    int updates = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      minibatch_rng.shuffle(std::span<std::size_t>(order));
      for (int m = 0; m < cfg.minibatches; ++m) {
        const std::size_t begin = static_cast<std::size_t>(m) * mb;
        const std::size_t end = m + 1 == cfg.minibatches ? batch : begin + mb;
        const std::span<const std::size_t> idx(order.data() + begin, end - begin);
        PpoBatch pb{gather(obs, idx), gather(actions, idx), gather(old_logp, idx), gather(adv, idx)};
        PpoLoss pl = ppo_policy_loss(policy.net, pb, cfg.clip_eps, cfg.entropy_coef);
        adam_step(policy.optimizer, policy.net, pl.grads);
        auto [le, ge] = value_loss(critic_ext.net, pb.obs, gather(ret_ext, idx));
        adam_step(critic_ext.optimizer, critic_ext.net, ge);
        stats.policy_loss += pl.loss;
        stats.entropy += pl.entropy;
        stats.value_loss_ext += le;
        if (critic_int) {
          auto [li, gi] = value_loss(critic_int->net, pb.obs, gather(ret_int, idx));
          adam_step(critic_int->optimizer, critic_int->net, gi);
          stats.value_loss_int += li;
        }
        ++updates;
      }
    }
    stats.policy_loss /= updates;
    stats.entropy /= updates;
    stats.value_loss_ext /= updates;
    stats.value_loss_int /= updates;

    if (cfg.intrinsic_enabled()) {
      std::vector<std::size_t> dorder(batch);
      std::iota(dorder.begin(), dorder.end(), 0);
      int n = 0;
      for (int epoch = 0; epoch < cfg.distill_epochs; ++epoch) {
        distill_rng.shuffle(std::span<std::size_t>(dorder));
        for (int m = 0; m < cfg.minibatches; ++m) {
          const std::size_t begin = static_cast<std::size_t>(m) * mb;
          const std::size_t end = m + 1 == cfg.minibatches ? batch : begin + mb;
          const std::span<const std::size_t> idx(dorder.data() + begin, end - begin);
          stats.distill_loss += bonus_model->distill(gather(next_obs, idx), distill_rng);
          ++n;
        }
      }
      if (n > 0) stats.distill_loss /= n;
    }

    curve.iterations.push_back(stats);
    const bool solved = stats.episodes > 0 && 2 * stats.goals >= stats.episodes;
    if (solved && !curve.episodes_to_solve) curve.episodes_to_solve = curve.episodes_total;
    if (solved && cfg.stop_when_solved) break;
    if (curve.episodes_total >= cfg.max_episodes) break;
  }
  curve.action_digest = digest;
  return curve;
}

}  // namespace drnd::online
