#include "drnd/offline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "drnd/error.hpp"

namespace drnd::offline {

void LineWalkSpec::validate() const {
  if (dim < 1) throw ConfigError("line walk dim must be >= 1");
  if (!(step > 0.0)) throw ConfigError("line walk step must be > 0");
  if (!(width > 0.0)) throw ConfigError("line walk reward width must be > 0");
  if (target < -1.0 || target > 1.0) throw ConfigError("line walk target must lie in [-1, 1]");
  if (horizon < 1) throw ConfigError("line walk horizon must be >= 1");
}

Vector LineWalkSpec::transition(const Vector& s, const Vector& a) const {
  return (s + step * a.cwiseMax(-1.0).cwiseMin(1.0)).cwiseMax(-1.0).cwiseMin(1.0);
}

double LineWalkSpec::reward(const Vector& next_state) const {
  const double d2 = (next_state.array() - target).square().sum();
  return std::exp(-d2 / (width * width));
}

void BehaviorSpec::validate() const {
  if (!(low >= -1.0 && high <= 1.0 && low <= high)) {
    throw ConfigError("behavior interval must satisfy -1 <= low <= high <= 1");
  }
}

std::string BehaviorSpec::describe() const {
  std::ostringstream os;
  os << "uniform actions in [" << low << ", " << high << "] per coordinate";
  return os.str();
}

Matrix OfflineDataset::state_actions() const {
  Matrix x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

void OfflineDataset::validate() const {
  const auto n = rewards.size();
  if (n == 0) throw ConfigError("offline dataset is empty");
  if (states.cols() != n || actions.cols() != n || next_states.cols() != n ||
      dones.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("offline dataset columns disagree on length");
  }
  if (actions.size() > 0 && (actions.minCoeff() < behavior.low || actions.maxCoeff() > behavior.high)) {
    throw ConfigError("offline dataset has actions outside the declared behavior bounds");
  }
}

OfflineDataset generate_offline_dataset(const LineWalkSpec& env, const BehaviorSpec& behavior,
                                        std::size_t size, std::uint64_t seed) {
  env.validate();
  behavior.validate();
  if (size < 1000) throw ConfigError("offline dataset size must be >= 1000, got " + std::to_string(size));
  Rng rng(derive_seed(seed, stream::kDataset));
  OfflineDataset ds;
  ds.env = env;
  ds.behavior = behavior;
  ds.seed = seed;
  const auto n = static_cast<Eigen::Index>(size);
  ds.states.resize(env.dim, n);
  ds.actions.resize(env.dim, n);
  ds.rewards.resize(n);
  ds.next_states.resize(env.dim, n);
  ds.dones.assign(size, 0);
  Vector s(env.dim);
  int t = env.horizon;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (t == env.horizon) {
      for (int j = 0; j < env.dim; ++j) s(j) = rng.uniform(-1.0, 1.0);
      t = 0;
    }
    Vector a(env.dim);
    for (int j = 0; j < env.dim; ++j) a(j) = rng.uniform(behavior.low, behavior.high);
    const Vector next = env.transition(s, a);
    ds.states.col(k) = s;
    ds.actions.col(k) = a;
    ds.rewards(k) = env.reward(next);
    ds.next_states.col(k) = next;
    s = next;
    ++t;
  }
  return ds;
}

void write_dataset_csv(std::ostream& out, const OfflineDataset& ds) {
  const int d = ds.state_dim();
  const int m = ds.action_dim();
  for (int j = 0; j < d; ++j) out << 's' << j << ',';
  for (int j = 0; j < m; ++j) out << 'a' << j << ',';
  out << "reward,";
  for (int j = 0; j < d; ++j) out << "ns" << j << ',';
  out << "done\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    for (int j = 0; j < d; ++j) out << ds.states(j, c) << ',';
    for (int j = 0; j < m; ++j) out << ds.actions(j, c) << ',';
    out << ds.rewards(c) << ',';
    for (int j = 0; j < d; ++j) out << ds.next_states(j, c) << ',';
    out << static_cast<int>(ds.dones[k]) << '\n';
  }
}

OfflineDataset read_dataset_csv(std::istream& in, const LineWalkSpec& env, const BehaviorSpec& behavior) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset csv: missing header");
  const int d = env.dim;
  const std::size_t fields = static_cast<std::size_t>(3 * d + 2);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("dataset csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != fields) {
      throw ConfigError("dataset csv line " + std::to_string(lineno) + ": expected " + std::to_string(fields) +
                        " fields, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  OfflineDataset ds;
  ds.env = env;
  ds.behavior = behavior;
  const auto n = static_cast<Eigen::Index>(rows.size());
  ds.states.resize(d, n);
  ds.actions.resize(d, n);
  ds.rewards.resize(n);
  ds.next_states.resize(d, n);
  ds.dones.resize(rows.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& r = rows[static_cast<std::size_t>(k)];
    for (int j = 0; j < d; ++j) {
      ds.states(j, k) = r[static_cast<std::size_t>(j)];
      ds.actions(j, k) = r[static_cast<std::size_t>(d + j)];
      ds.next_states(j, k) = r[static_cast<std::size_t>(2 * d + 1 + j)];
    }
    ds.rewards(k) = r[static_cast<std::size_t>(2 * d)];
    ds.dones[static_cast<std::size_t>(k)] = r.back() != 0.0 ? 1 : 0;
  }
  ds.validate();
  return ds;
}

std::string dataset_metadata_json(const OfflineDataset& ds) {
  nlohmann::ordered_json j;
  j["env"] = {{"kind", "line_walk"},
              {"dim", ds.env.dim},
              {"step", ds.env.step},
              {"target", ds.env.target},
              {"width", ds.env.width},
              {"horizon", ds.env.horizon}};
  j["behavior"] = {{"description", ds.behavior.describe()}, {"low", ds.behavior.low}, {"high", ds.behavior.high}};
  j["action_bounds"] = {ds.behavior.low, ds.behavior.high};
  j["size"] = ds.size();
  j["seed"] = ds.seed;
  j["columns"] = "s0..s{d-1},a0..a{d-1},reward,ns0..ns{d-1},done";
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Config and pre-training

void SacConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (lambda_actor < 0.0) throw ConfigError("lambda_actor must be >= 0");
  if (lambda_critic < 0.0) throw ConfigError("lambda_critic must be >= 0");
  if (!(initial_temperature > 0.0)) throw ConfigError("initial_temperature must be > 0");
  if (!(actor_lr > 0.0 && critic_lr > 0.0 && temperature_lr > 0.0 && drnd_lr > 0.0)) {
    throw ConfigError("learning rates must be > 0");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (hidden < 1 || bonus_hidden < 1 || bonus_output_dim < 1) throw ConfigError("network widths must be >= 1");
  if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be >= 0");
  if (num_targets < 1) throw ConfigError("num_targets must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (eval_every < 1 || eval_episodes < 1) throw ConfigError("eval_every and eval_episodes must be >= 1");
}

DrndConfig SacConfig::drnd_config(int input_dim) const {
  DrndConfig c;
  c.input_dim = input_dim;
  c.output_dim = bonus_output_dim;
  c.predictor_hidden = {bonus_hidden, bonus_hidden};
  c.target_hidden = {bonus_hidden};
  c.num_targets = num_targets;
  c.bonus.alpha = alpha;
  c.adam.lr = drnd_lr;
  c.normalize_inputs = normalize_bonus_inputs;
  return c;
}

namespace {

Matrix gather_cols(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t q = 0; q < idx.size(); ++q) out.col(static_cast<Eigen::Index>(q)) = m.col(idx[q]);
  return out;
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix x(top.rows() + bottom.rows(), top.cols());
  x.topRows(top.rows()) = top;
  x.bottomRows(bottom.rows()) = bottom;
  return x;
}

Matrix normals(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
  }
  return m;
}

}  // namespace

PretrainReport pretrain_drnd(Drnd& model, const OfflineDataset& ds, const SacConfig& cfg, Rng& rng) {
  ds.validate();
  const Matrix x = ds.state_actions();
  if (cfg.normalize_bonus_inputs) model.input_normalizer().update(x);
  // The per-epoch loss is monitored on a fixed strided subset.
  const Eigen::Index stride = std::max<Eigen::Index>(1, x.cols() / kPretrainMonitorColumns);
  std::vector<Eigen::Index> monitor_idx;
  for (Eigen::Index k = 0; k < x.cols(); k += stride) monitor_idx.push_back(k);
  const Matrix monitor = gather_cols(x, monitor_idx);
  PretrainReport report;
  report.expected_loss.push_back(model.expected_loss(monitor));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.cols()));
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += bs) {
      const std::size_t end = std::min(order.size(), begin + bs);
      std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
      model.distill(gather_cols(x, idx), rng);
    }
    report.expected_loss.push_back(model.expected_loss(monitor));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Policy and losses

SacNets make_sac_nets(int state_dim, int action_dim, const SacConfig& cfg, std::uint64_t seed) {
  SacNets n;
  n.actor = mlp_init({{state_dim, cfg.hidden, cfg.hidden, 2 * action_dim}, Activation::relu,
                      derive_seed(seed, stream::kPolicy)});
  const std::uint64_t cs = derive_seed(seed, stream::kCritic);
  n.q1 = mlp_init({{state_dim + action_dim, cfg.hidden, cfg.hidden, 1}, Activation::relu, derive_seed(cs, 1)});
  n.q2 = mlp_init({{state_dim + action_dim, cfg.hidden, cfg.hidden, 1}, Activation::relu, derive_seed(cs, 2)});
  n.q1_target = n.q1;
  n.q2_target = n.q2;
  n.log_temperature = std::log(cfg.initial_temperature);
  return n;
}

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct PolicyForward {
  ForwardCache cache;
  Matrix mean, raw, log_std, stddev, u, actions;
  Vector logp;
};

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

PolicyForward policy_forward(const MlpParams& actor, const Matrix& states, const Matrix& noise) {
  PolicyForward f;
  const Matrix out = mlp_forward_batch(actor, states, &f.cache);
  const Eigen::Index d = out.rows() / 2;
  if (noise.rows() != d || noise.cols() != states.cols()) throw ShapeError("policy noise has the wrong shape");
  f.mean = out.topRows(d);
  f.raw = out.bottomRows(d);
  f.log_std = (kLogStdMin + 0.5 * (kLogStdMax - kLogStdMin) * (f.raw.array().tanh() + 1.0)).matrix();
  f.stddev = f.log_std.array().exp().matrix();
  f.u = f.mean + f.stddev.cwiseProduct(noise);
  f.actions = f.u.array().tanh().matrix();
  f.logp = Vector::Zero(states.cols());
  for (Eigen::Index k = 0; k < states.cols(); ++k) {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double u = f.u(j, k);
      // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
      const double log_jac = 2.0 * (std::log(2.0) - u - softplus(-2.0 * u));
      lp += -0.5 * noise(j, k) * noise(j, k) - f.log_std(j, k) - kHalfLog2Pi - log_jac;
    }
    f.logp(k) = lp;
  }
  return f;
}

Vector q_values(const MlpParams& q, const Matrix& sa) { return mlp_forward_batch(q, sa).row(0).transpose(); }

}  // namespace

PolicySample sample_policy(const MlpParams& actor, const Matrix& states, const Matrix& noise) {
  PolicyForward f = policy_forward(actor, states, noise);
  return {std::move(f.actions), std::move(f.logp)};
}

Matrix policy_mode(const MlpParams& actor, const Matrix& states) {
  const Matrix out = mlp_forward_batch(actor, states);
  return out.topRows(out.rows() / 2).array().tanh().matrix();
}

double critic_target_value(double reward, bool done, double gamma, double q_next, double beta, double logp,
                           double lambda_critic, double bonus) {
  return reward + (done ? 0.0 : gamma * (q_next - beta * logp - lambda_critic * bonus));
}

Vector critic_target(const SacNets& nets, const Vector& rewards, const Matrix& next_states,
                     const std::vector<std::uint8_t>& dones, const Matrix& noise, const Drnd* bonus,
                     const SacConfig& cfg) {
  if (rewards.size() != next_states.cols() || dones.size() != static_cast<std::size_t>(rewards.size())) {
    throw ShapeError("critic_target: batch fields disagree on length");
  }
  const PolicySample next = sample_policy(nets.actor, next_states, noise);
  const Matrix sa = stack(next_states, next.actions);
  const Vector q = q_values(nets.q1_target, sa).cwiseMin(q_values(nets.q2_target, sa));
  Vector b = Vector::Zero(rewards.size());
  if (bonus && cfg.lambda_critic != 0.0) b = bonus->bonus_batch(sa, Exec::serial).total;
  const double beta = std::exp(nets.log_temperature);
  Vector y(rewards.size());
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    y(k) = critic_target_value(rewards(k), dones[static_cast<std::size_t>(k)] != 0, cfg.gamma, q(k), beta,
                               next.logp(k), cfg.lambda_critic, b(k));
  }
  if (!y.allFinite()) throw NumericError("critic_target: non-finite target");
  return y;
}

ActorLoss actor_loss(const SacNets& nets, const Matrix& states, const Matrix& noise, const Drnd* bonus,
                     const SacConfig& cfg) {
  PolicyForward f = policy_forward(nets.actor, states, noise);
  const Eigen::Index d = f.actions.rows();
  const Eigen::Index b = states.cols();
  const double inv_b = 1.0 / static_cast<double>(b);
  const double beta = std::exp(nets.log_temperature);
  const Matrix sa = stack(states, f.actions);

  ForwardCache c1, c2;
  const Matrix q1 = mlp_forward_batch(nets.q1, sa, &c1);
  const Matrix q2 = mlp_forward_batch(nets.q2, sa, &c2);
  // d(-min Q)/d(sa): route each column through the smaller critic.
  Matrix up1 = Matrix::Zero(1, b), up2 = Matrix::Zero(1, b);
  ActorLoss out;
  for (Eigen::Index k = 0; k < b; ++k) {
    if (q1(0, k) <= q2(0, k)) {
      up1(0, k) = -1.0;
      out.loss -= q1(0, k) * inv_b;
    } else {
      up2(0, k) = -1.0;
      out.loss -= q2(0, k) * inv_b;
    }
  }
  Matrix g_action = mlp_backward_batch(nets.q1, c1, up1).input_grads.bottomRows(d) +
                    mlp_backward_batch(nets.q2, c2, up2).input_grads.bottomRows(d);
  if (bonus && cfg.lambda_actor != 0.0) {
    const Vector bv = bonus->bonus_batch(sa, Exec::serial).total;
    out.mean_bonus = bv.mean();
    out.loss += cfg.lambda_actor * out.mean_bonus;
    g_action += cfg.lambda_actor * bonus->total_bonus_input_grad(sa).bottomRows(d);
  }
  out.mean_logp = f.logp.mean();
  out.loss += beta * out.mean_logp;

  // Back through a = tanh(u), u = mean + std * eps, log_std(raw).
  Matrix upstream(2 * d, b);
  for (Eigen::Index k = 0; k < b; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double a = f.actions(j, k);
      const double t = std::tanh(f.u(j, k));
      const double du = g_action(j, k) * (1.0 - a * a) + beta * 2.0 * t;  // d/du of the per-sample loss
      const double eps = noise(j, k);
      const double dlog_std = du * f.stddev(j, k) * eps - beta;
      const double th = std::tanh(f.raw(j, k));
      const double draw = dlog_std * 0.5 * (kLogStdMax - kLogStdMin) * (1.0 - th * th);
      upstream(j, k) = du * inv_b;
      upstream(d + j, k) = draw * inv_b;
    }
  }
  if (!std::isfinite(out.loss)) throw NumericError("actor_loss: non-finite loss");
  out.grads = mlp_backward_batch(nets.actor, f.cache, upstream).grads;
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation and training

namespace {

template <class ActionFn>
double run_episodes(const LineWalkSpec& env, int episodes, std::uint64_t seed, ActionFn&& act) {
  Rng rng(derive_seed(seed, stream::kEval));
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Vector s(env.dim);
    for (int j = 0; j < env.dim; ++j) s(j) = rng.uniform(-1.0, 1.0);
    for (int t = 0; t < env.horizon; ++t) {
      const Vector a = act(s, rng);
      s = env.transition(s, a);
      total += env.reward(s);
    }
  }
  return total / episodes;
}

struct ScalarAdam {
  double lr, m = 0.0, v = 0.0;
  long step = 0;
  void apply(double& param, double grad) {
    ++step;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mh = m / (1.0 - std::pow(0.9, static_cast<double>(step)));
    const double vh = v / (1.0 - std::pow(0.999, static_cast<double>(step)));
    param -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

void critic_update(MlpParams& q, AdamState& opt, const Matrix& sa, const Vector& y) {
  ForwardCache cache;
  const Matrix out = mlp_forward_batch(q, sa, &cache);
  const double inv_b = 1.0 / static_cast<double>(y.size());
  Matrix up(1, y.size());
  for (Eigen::Index k = 0; k < y.size(); ++k) up(0, k) = 2.0 * (out(0, k) - y(k)) * inv_b;
  adam_step(opt, q, mlp_backward_batch(q, cache, up).grads);
}

}  // namespace

double evaluate_policy(const MlpParams& actor, const LineWalkSpec& env, int episodes, std::uint64_t seed) {
  return run_episodes(env, episodes, seed, [&](const Vector& s, Rng&) -> Vector {
    return policy_mode(actor, s).col(0);
  });
}

double evaluate_behavior(const BehaviorSpec& behavior, const LineWalkSpec& env, int episodes,
                         std::uint64_t seed) {
  return run_episodes(env, episodes, seed, [&](const Vector& s, Rng& rng) -> Vector {
    Vector a(s.size());
    for (Eigen::Index j = 0; j < a.size(); ++j) a(j) = rng.uniform(behavior.low, behavior.high);
    return a;
  });
}

EvalReport train_offline(const SacConfig& cfg, const OfflineDataset& ds, std::uint64_t seed) {
  cfg.validate();
  ds.validate();
  const int sd = ds.state_dim();
  const int ad = ds.action_dim();
  EvalReport report;

  Drnd bonus(cfg.drnd_config(sd + ad), seed);
  Rng distill_rng(derive_seed(seed, stream::kDistill));
  report.pretrain_loss = pretrain_drnd(bonus, ds, cfg, distill_rng).expected_loss;
  report.drnd_fingerprint_before = drnd::fingerprint(bonus.predictor().net);

  SacNets nets = make_sac_nets(sd, ad, cfg, seed);
  AdamState actor_opt(nets.actor, AdamConfig{.lr = cfg.actor_lr});
  AdamState q1_opt(nets.q1, AdamConfig{.lr = cfg.critic_lr});
  AdamState q2_opt(nets.q2, AdamConfig{.lr = cfg.critic_lr});
  ScalarAdam temp_opt{cfg.temperature_lr};
  const double target_entropy = cfg.target_entropy.value_or(-static_cast<double>(ad));
  const bool penalize = cfg.lambda_actor != 0.0 || cfg.lambda_critic != 0.0;
  const Drnd* penalty = penalize ? &bonus : nullptr;

  Rng batch_rng(derive_seed(seed, stream::kMinibatch));
  Rng noise_rng(derive_seed(seed, stream::kActions));
  const auto n = ds.size();
  const std::uint64_t eval_seed = derive_seed(seed, stream::kEval);

  for (int it = 1; it <= cfg.iterations; ++it) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(cfg.batch_size));
    for (auto& i : idx) i = static_cast<Eigen::Index>(batch_rng.index(n));
    const Matrix s = gather_cols(ds.states, idx);
    const Matrix a = gather_cols(ds.actions, idx);
    const Matrix s2 = gather_cols(ds.next_states, idx);
    Vector r(cfg.batch_size);
    std::vector<std::uint8_t> done(idx.size());
    for (std::size_t q = 0; q < idx.size(); ++q) {
      r(static_cast<Eigen::Index>(q)) = ds.rewards(idx[q]);
      done[q] = ds.dones[static_cast<std::size_t>(idx[q])];
    }

    const Vector y = critic_target(nets, r, s2, done, normals(noise_rng, ad, cfg.batch_size), penalty, cfg);
    const Matrix sa = stack(s, a);
    critic_update(nets.q1, q1_opt, sa, y);
    critic_update(nets.q2, q2_opt, sa, y);

    const ActorLoss al = actor_loss(nets, s, normals(noise_rng, ad, cfg.batch_size), penalty, cfg);
    adam_step(actor_opt, nets.actor, al.grads);
    // Temperature loss: -log_beta * (logp + target_entropy).
    temp_opt.apply(nets.log_temperature, -(al.mean_logp + target_entropy));

    soft_update(nets.q1_target, nets.q1, cfg.tau);
    soft_update(nets.q2_target, nets.q2, cfg.tau);

    if (it % cfg.eval_every == 0 || it == cfg.iterations) {
      EvalPoint p;
      p.iteration = it;
      p.mean_return = evaluate_policy(nets.actor, ds.env, cfg.eval_episodes, eval_seed);
      const Matrix pa = policy_mode(nets.actor, ds.states);
      p.policy_bonus = bonus.bonus_batch(stack(ds.states, pa)).total.mean();
      report.curve.push_back(p);
    }
  }

  report.mean_return = evaluate_policy(nets.actor, ds.env, cfg.eval_episodes, eval_seed);
  report.behavior_return = evaluate_behavior(ds.behavior, ds.env, cfg.eval_episodes, eval_seed);
  report.policy_bonus_mean = bonus.bonus_batch(stack(ds.states, policy_mode(nets.actor, ds.states))).total.mean();
  report.dataset_bonus_mean = bonus.bonus_batch(ds.state_actions()).total.mean();
  report.final_temperature = std::exp(nets.log_temperature);
  report.drnd_fingerprint_after = drnd::fingerprint(bonus.predictor().net);
  return report;
}

}  // namespace drnd::offline
