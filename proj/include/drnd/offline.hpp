#pragma once

// SAC with a DRND anti-exploration penalty, trained on a static dataset.
// The DRND predictor is pre-trained on (s, a) pairs and frozen afterwards.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drnd/drnd.hpp"
#include "drnd/nn.hpp"
#include "drnd/rng.hpp"

namespace drnd::offline {

// Line walk: state and action in [-1, 1]^d, s' = clip(s + step * a),
// r = exp(-||s' - target||^2 / width^2). No terminal states; episodes are
// cut at `horizon` steps.
struct LineWalkSpec {
  int dim = 1;
  double step = 0.2;
  double target = 0.5;
  double width = 0.2;
  int horizon = 20;

  void validate() const;
  Vector transition(const Vector& s, const Vector& a) const;
  double reward(const Vector& next_state) const;
};

// Behaviour policy: every action coordinate uniform in [low, high].
struct BehaviorSpec {
  double low = -0.2;
  double high = 0.2;

  void validate() const;
  std::string describe() const;
};

struct OfflineDataset {
  LineWalkSpec env;
  BehaviorSpec behavior;
  std::uint64_t seed = 0;
  Matrix states;       // d x T
  Matrix actions;      // d x T
  Vector rewards;      // T
  Matrix next_states;  // d x T
  std::vector<std::uint8_t> dones;

  std::size_t size() const { return static_cast<std::size_t>(rewards.size()); }
  int state_dim() const { return static_cast<int>(states.rows()); }
  int action_dim() const { return static_cast<int>(actions.rows()); }
  // (s, a) stacked: 2d x T.
  Matrix state_actions() const;
  void validate() const;
};

// Episodes start at a uniform state in [-1, 1]^d. Throws ConfigError when
// size < 1000.
OfflineDataset generate_offline_dataset(const LineWalkSpec& env, const BehaviorSpec& behavior,
                                        std::size_t size, std::uint64_t seed);

// CSV: header s0..s{d-1},a0..,reward,ns0..,done; one transition per row,
// doubles printed with 17 significant digits.
void write_dataset_csv(std::ostream& out, const OfflineDataset& ds);
OfflineDataset read_dataset_csv(std::istream& in, const LineWalkSpec& env, const BehaviorSpec& behavior);
std::string dataset_metadata_json(const OfflineDataset& ds);

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.005;
  std::optional<double> target_entropy;  // default -action_dim
  double initial_temperature = 1.0;
  // At 1.0 the penalty is too small next to the return gained by leaving the
  // data on the line walk; 10 keeps the policy in support.
  double lambda_actor = 10.0;
  double lambda_critic = 10.0;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double temperature_lr = 1e-3;
  int batch_size = 256;
  int hidden = 64;
  // DRND
  int pretrain_epochs = 100;
  int num_targets = 10;
  double alpha = 0.9;
  int bonus_hidden = 64;
  int bonus_output_dim = 32;
  double drnd_lr = 1e-3;
  bool normalize_bonus_inputs = false;
  // Loop
  int iterations = 3000;
  int eval_every = 500;
  int eval_episodes = 10;

  void validate() const;
  DrndConfig drnd_config(int input_dim) const;
};

struct PretrainReport {
  // Exact expected distillation loss on the monitor subset: entry 0 before
  // training, then one entry per epoch.
  std::vector<double> expected_loss;
};

inline constexpr Eigen::Index kPretrainMonitorColumns = 2000;

// K epochs of minibatch distillation on (s, a). K = 0 leaves the predictor
// untouched. The monitor subset is every (T / 2000)-th transition.
PretrainReport pretrain_drnd(Drnd& model, const OfflineDataset& ds, const SacConfig& cfg, Rng& rng);

// Squashed Gaussian policy: net(s) = [mean; raw_log_std], log_std =
// kLogStdMin + (kLogStdMax - kLogStdMin) * (tanh(raw) + 1) / 2,
// a = tanh(mean + std * eps).
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct SacNets {
  MlpParams actor;
  MlpParams q1, q2;
  MlpParams q1_target, q2_target;
  double log_temperature = 0.0;
};

SacNets make_sac_nets(int state_dim, int action_dim, const SacConfig& cfg, std::uint64_t seed);

struct PolicySample {
  Matrix actions;  // d x B
  Vector logp;     // B
};

// Reparameterized sample with explicit noise (d x B standard normals).
PolicySample sample_policy(const MlpParams& actor, const Matrix& states, const Matrix& noise);
// tanh(mean): the deterministic evaluation action.
Matrix policy_mode(const MlpParams& actor, const Matrix& states);

// r + gamma * (1 - done) * (min_i Q'_i(s', a') - beta * logp(a'|s') - lambda_critic * b(s', a')),
// with a' ~ pi(.|s') drawn with `noise`. bonus may be null (no penalty).
Vector critic_target(const SacNets& nets, const Vector& rewards, const Matrix& next_states,
                     const std::vector<std::uint8_t>& dones, const Matrix& noise, const Drnd* bonus,
                     const SacConfig& cfg);

// Scalar form of the target, for checks: r + gamma * (1 - done) * (q - beta * logp - lambda * b).
double critic_target_value(double reward, bool done, double gamma, double q_next, double beta, double logp,
                           double lambda_critic, double bonus);

struct ActorLoss {
  double loss = 0.0;  // mean(beta * logp - min Q + lambda_actor * b)
  double mean_logp = 0.0;
  double mean_bonus = 0.0;
  MlpGrads grads;     // d loss / d actor params
};

// Critics and DRND are constants; gradients reach the actor through the
// reparameterized action.
ActorLoss actor_loss(const SacNets& nets, const Matrix& states, const Matrix& noise, const Drnd* bonus,
                     const SacConfig& cfg);

struct EvalPoint {
  int iteration = 0;
  double mean_return = 0.0;
  double policy_bonus = 0.0;
};

struct EvalReport {
  double mean_return = 0.0;        // final evaluation
  double policy_bonus_mean = 0.0;  // b(s, pi(s)) over dataset states
  double dataset_bonus_mean = 0.0; // b(s, a) over the dataset
  double behavior_return = 0.0;    // behaviour policy, same start states
  double bonus_ratio() const { return policy_bonus_mean / dataset_bonus_mean; }
  std::vector<EvalPoint> curve;
  std::vector<double> pretrain_loss;
  double final_temperature = 0.0;
  std::uint64_t drnd_fingerprint_before = 0;
  std::uint64_t drnd_fingerprint_after = 0;
};

// Mean return of `episodes` evaluation episodes from uniform start states.
double evaluate_policy(const MlpParams& actor, const LineWalkSpec& env, int episodes, std::uint64_t seed);
double evaluate_behavior(const BehaviorSpec& behavior, const LineWalkSpec& env, int episodes,
                         std::uint64_t seed);

// Pre-trains DRND, then runs SAC. Deterministic in (cfg, dataset, seed).
EvalReport train_offline(const SacConfig& cfg, const OfflineDataset& ds, std::uint64_t seed);

}  // namespace drnd::offline
