#pragma once

// PPO with a DRND intrinsic reward on small hard-exploration environments.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drnd/drnd.hpp"
#include "drnd/nn.hpp"

namespace drnd::online {

enum class EnvKind { deep_sea, sparse_chain };
enum class ObsEncoding { one_hot, coordinates };

std::string to_string(EnvKind k);
EnvKind env_kind_from_string(const std::string& name);
std::string to_string(ObsEncoding e);
ObsEncoding obs_encoding_from_string(const std::string& name);

struct EnvSpec {
  EnvKind kind = EnvKind::deep_sea;
  int size = 10;
  ObsEncoding encoding = ObsEncoding::one_hot;

  void validate() const;
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool done = false;
  bool goal = false;
};

// deep_sea(N): an N x N grid entered at the top-left cell. Every step moves
// one row down and one column left (action 0) or right (action 1), clamped
// to the grid. Moving right costs 0.01 / N. The episode ends after N steps;
// the last step pays 1 instead of the cost when it moves right into the
// bottom-right cell. A left move in column 0 is clamped away, so apart from
// that the rewarded path is all right moves.
//
// sparse_chain(L): states 0..L-1 starting at 0; action 1 moves right,
// action 0 moves left (clamped at 0). Reaching L-1 pays 1 and ends the
// episode; otherwise it ends after 2L steps with return 0.
//
// One-hot observations index (row, col) over (N+1) x N cells for deep_sea
// (the extra row holds the terminal position) and the L states for the
// chain. Coordinate observations are positions scaled to [0, 1].
class ToyEnv {
 public:
  explicit ToyEnv(EnvSpec spec);

  Vector reset();
  // Throws UsageError after the episode has ended or on an invalid action.
  StepResult step(int action);

  Vector observation() const;
  int obs_dim() const;
  int num_actions() const { return 2; }
  int horizon() const;
  bool done() const { return done_; }
  const EnvSpec& spec() const { return spec_; }

 private:
  EnvSpec spec_;
  int row_ = 0;
  int col_ = 0;
  int t_ = 0;
  bool done_ = false;
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation over one trajectory segment.
// dones[t] marks that the episode ended on step t (no bootstrap across it);
// bootstrap is V(s_T) for the state after the last step. Throws ShapeError
// on length mismatches.
Advantages gae(std::span<const double> rewards, std::span<const double> values,
               std::span<const std::uint8_t> dones, double bootstrap, double gamma, double lambda);

// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A).
double clipped_surrogate(double ratio, double advantage, double eps);
// d clipped_surrogate / d ratio.
double clipped_surrogate_grad(double ratio, double advantage, double eps);

enum class BonusMethod { drnd, rnd, cfn, none };
std::string to_string(BonusMethod m);
BonusMethod bonus_method_from_string(const std::string& name);

struct PpoConfig {
  EnvSpec env;
  BonusMethod method = BonusMethod::drnd;
  int num_envs = 16;
  int rollout_steps = 0;  // per env per iteration; 0 means the env horizon
  double gamma = 0.99;
  double gamma_int = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.1;
  int epochs = 4;
  int minibatches = 4;
  double entropy_coef = 0.01;
  double intrinsic_coef = 1.0;  // lambda
  double policy_lr = 3e-4;
  double critic_lr = 1e-3;
  int hidden = 64;
  // DRND
  int num_targets = 10;
  double alpha = 0.9;
  int bonus_output_dim = 64;
  double drnd_lr = 1e-3;
  int distill_epochs = 1;
  bool normalize_bonus_inputs = true;
  // Budget / stopping
  int max_iterations = 200;
  int max_episodes = 2000;
  bool stop_when_solved = true;

  void validate() const;
  int steps_per_env() const;
  // DRND settings implied by method (rnd: N=1, alpha=1; cfn: rademacher,
  // N=2, alpha=0).
  DrndConfig drnd_config() const;
  bool intrinsic_enabled() const { return method != BonusMethod::none; }
};

struct IterationStats {
  int iteration = 0;
  int episodes_total = 0;
  int episodes = 0;           // finished this iteration
  int goals = 0;              // of those, how many reached the goal
  double mean_return = 0.0;   // over episodes finished this iteration (0 if none)
  double intrinsic_mean = 0.0;  // raw bonus
  double intrinsic_std = 0.0;
  double policy_loss = 0.0;
  double value_loss_ext = 0.0;
  double value_loss_int = 0.0;
  double distill_loss = 0.0;
  double entropy = 0.0;
};

struct TrainingCurve {
  std::vector<IterationStats> iterations;
  // Episodes elapsed at the end of the first iteration in which at least
  // half of the finished episodes reached the goal.
  std::optional<int> episodes_to_solve;
  int episodes_total = 0;
  // Fingerprint of every action sampled, in order.
  std::uint64_t action_digest = 0;
};

struct Policy {
  MlpParams net;  // obs -> logits
  AdamState optimizer;
};

struct Critic {
  MlpParams net;  // obs -> value
  AdamState optimizer;
};

// Softmax over each column of logits.
Matrix softmax_columns(const Matrix& logits);

struct PpoBatch {
  Matrix obs;                  // obs_dim x B
  std::vector<int> actions;
  std::vector<double> old_logp;
  std::vector<double> advantages;
};

struct PpoLoss {
  double surrogate = 0.0;  // mean clipped surrogate (to be maximized)
  double entropy = 0.0;
  double loss = 0.0;       // -surrogate - entropy_coef * entropy
  MlpGrads grads;
};

// Loss and policy gradient for one minibatch.
PpoLoss ppo_policy_loss(const MlpParams& policy, const PpoBatch& batch, double clip_eps,
                        double entropy_coef);

// 0.5 * mean (V - R)^2 and its gradient.
std::pair<double, MlpGrads> value_loss(const MlpParams& critic, const Matrix& obs,
                                       std::span<const double> returns);

// Runs PPO with the configured bonus. Deterministic in (cfg, seed).
TrainingCurve rollout_train(const PpoConfig& cfg, std::uint64_t seed);

}  // namespace drnd::online
