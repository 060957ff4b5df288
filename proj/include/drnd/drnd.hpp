#pragma once

// Distributional random network distillation.
//
// A frozen ensemble of N random target networks defines, at every input x, a
// uniform distribution over the N target outputs. A single predictor is
// regressed onto draws from that distribution. Two bonuses are read off the
// predictor:
//
//   b1(x) = ||f(x) - mu(x)||^2
//   b2(x) = sqrt( sum_j (f_j^2 - mu_j^2) / max(sum_j (B2_j - mu_j^2), eps) )
//   b(x)  = alpha * b1(x) + (1 - alpha) * b2(x)
//
// where mu and B2 are the first and second raw moments of the target outputs.
// b2 tracks 1/sqrt(visit count) once the predictor has converged on x.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "drnd/nn.hpp"
#include "drnd/parallel.hpp"
#include "drnd/rng.hpp"

namespace drnd {

enum class TargetMode { random_mlp, rademacher };

std::string to_string(TargetMode mode);
TargetMode target_mode_from_string(const std::string& name);

struct MomentSet {
  Vector mu;
  Vector b2;
};

// Column-wise moments for a batch of inputs, each output_dim x B.
struct MomentBatch {
  Matrix mu;
  Matrix b2;
};

class TargetEnsemble {
 public:
  TargetEnsemble() = default;

  // Target i is mlp_init(spec with seed = derive_seed(seed, i)). In
  // rademacher mode count must be 2 and the targets are the constant
  // vectors -1 and +1; only the MlpSpec input/output dims are used.
  static TargetEnsemble create(const MlpSpec& spec, int count, TargetMode mode, std::uint64_t seed);
  static TargetEnsemble from_targets(std::vector<MlpParams> targets);

  int size() const { return count_; }
  int input_dim() const { return spec_.input_dim(); }
  int output_dim() const { return spec_.output_dim(); }
  TargetMode mode() const { return mode_; }
  const MlpSpec& spec() const { return spec_; }
  const std::vector<MlpParams>& targets() const { return targets_; }

  Vector output(int i, const Vector& x) const;
  Matrix output_batch(int i, const Matrix& inputs) const;

  MomentSet moments(const Vector& x) const;
  MomentBatch moments_batch(const Matrix& inputs) const;

  // Draws one target index uniformly (one Rng::index call) and returns that
  // target's output at x.
  Vector sample_c(const Vector& x, Rng& rng) const;
  int sample_index(Rng& rng) const { return static_cast<int>(rng.index(static_cast<std::size_t>(count_))); }

  std::uint64_t fingerprint() const;

 private:
  MlpSpec spec_;
  TargetMode mode_ = TargetMode::random_mlp;
  int count_ = 0;
  std::vector<MlpParams> targets_;
};

struct PredictorState {
  MlpParams net;
  AdamState optimizer;

  static PredictorState create(const MlpSpec& spec, AdamConfig adam);
};

// One Adam step on mean_k ||f(x_k) - c_k||^2. inputs is in x B, targets is
// out x B. Returns the loss before the step. Throws UsageError on an empty
// batch and NumericError if the loss is not finite (params untouched).
double distill_step(PredictorState& pred, const Matrix& inputs, const Matrix& targets);

// Weighted form: sum_k w_k ||f(x_k) - c_k||^2 / sum_k w_k. With c_k the mean
// of w_k draws at x_k this has the same gradient as the unweighted loss over
// all draws; the returned value omits the (constant) within-group scatter.
double distill_step_weighted(PredictorState& pred, const Matrix& inputs, const Matrix& targets,
                             const Vector& weights);

struct BonusConfig {
  double alpha = 0.9;
  double denom_epsilon = 1e-8;
  // When false the ratio is used raw: a denominator below denom_epsilon
  // raises DegenerateError and a negative ratio raises NumericError.
  bool clamp_negative_numerator = true;
  std::optional<double> ratio_upper_clamp;
  double lambda = 1.0;

  void validate() const;
};

double bonus_b1(const Vector& prediction, const MomentSet& moments);
double bonus_b2(const Vector& prediction, const MomentSet& moments, const BonusConfig& cfg);
double bonus_total(double b1, double b2, const BonusConfig& cfg);

double bonus_b1(const PredictorState& pred, const MomentSet& moments, const Vector& x);
double bonus_b2(const PredictorState& pred, const MomentSet& moments, const Vector& x,
                const BonusConfig& cfg);

// Welford running mean/variance, mergeable.
class RunningStats {
 public:
  void push(double value);
  double mean() const { return mean_; }
  double variance() const { return count_ > 0 ? m2_ / static_cast<double>(count_) : 0.0; }
  std::uint64_t count() const { return count_; }

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Divides intrinsic rewards by the running std of the discounted intrinsic
// return. Each stream keeps its own discounted accumulator; the variance is
// pooled over all streams. The std is floored at std_floor.
class RunningNormalizer {
 public:
  explicit RunningNormalizer(double gamma = 0.99, std::size_t streams = 1, double std_floor = 1e-8);

  // Single-stream form: rewards are consecutive in time.
  std::vector<double> normalize(std::span<const double> rewards);
  // rewards[s][t]: stream s, time t. Statistics are updated with the whole
  // batch before any reward is scaled.
  std::vector<std::vector<double>> normalize_streams(const std::vector<std::vector<double>>& rewards);

  double stddev() const;
  const RunningStats& stats() const { return stats_; }

 private:
  double gamma_;
  double std_floor_;
  std::vector<double> discounted_;
  RunningStats stats_;
};

// Per-dimension running mean/std of inputs; normalized values are clipped.
class InputNormalizer {
 public:
  InputNormalizer() = default;
  InputNormalizer(int dim, double clip = 5.0);

  void update(const Matrix& inputs);  // columns are samples
  Vector apply(const Vector& x) const;
  Matrix apply_batch(const Matrix& inputs) const;
  // d normalized / d raw, element-wise: 1/std inside the clip range, else 0.
  Matrix jacobian_diag(const Matrix& inputs) const;

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  Vector stddev() const;
  double count() const { return count_; }

 private:
  Vector mean_;
  Vector m2_;
  double count_ = 0.0;
  double clip_ = 5.0;
};

struct BonusTerms {
  double b1 = 0.0;
  double b2 = 0.0;
  double total = 0.0;
};

struct BonusBatch {
  Vector b1;
  Vector b2;
  Vector total;
};

struct DrndConfig {
  int input_dim = 2;
  int output_dim = 16;
  std::vector<int> predictor_hidden{16, 16};
  std::vector<int> target_hidden{16};
  Activation activation = Activation::relu;
  InitScheme init = InitScheme::he_uniform;
  int num_targets = 10;
  TargetMode mode = TargetMode::random_mlp;
  BonusConfig bonus;
  AdamConfig adam{.lr = 1e-4};
  bool normalize_inputs = false;
  double input_clip = 5.0;

  void validate() const;
  MlpSpec predictor_spec(std::uint64_t seed) const;
  MlpSpec target_spec() const;
};

// Ensemble + predictor + optional input normalization, the unit agents and
// experiments work with.
class Drnd {
 public:
  Drnd(const DrndConfig& cfg, std::uint64_t seed);
  Drnd(const DrndConfig& cfg, TargetEnsemble ensemble, PredictorState predictor);

  const DrndConfig& config() const { return cfg_; }
  const TargetEnsemble& ensemble() const { return ensemble_; }
  const PredictorState& predictor() const { return predictor_; }
  PredictorState& predictor() { return predictor_; }
  InputNormalizer& input_normalizer() { return normalizer_; }
  const InputNormalizer& input_normalizer() const { return normalizer_; }

  BonusTerms bonus(const Vector& x) const;

  // Kernel: evaluates columns in fixed-size chunks. Exec::serial is the
  // reference; both paths return identical values.
  BonusBatch bonus_batch(const Matrix& inputs, Exec exec = Exec::parallel) const;

  // d b(x) / d x for the total bonus, through the input normalizer, the
  // predictor and every target. Parameters are treated as constants.
  Matrix total_bonus_input_grad(const Matrix& inputs) const;

  // One distillation step on a batch: draws c for every column (one index
  // per column from rng) and applies distill_step. Returns the loss.
  double distill(const Matrix& inputs, Rng& rng);

  // Expected distillation loss E_c ||f(x) - c||^2 averaged over columns,
  // computed exactly from the moments (no sampling).
  double expected_loss(const Matrix& inputs) const;

  static constexpr std::size_t kChunkColumns = 256;

 private:
  Matrix prepare(const Matrix& inputs) const;

  DrndConfig cfg_;
  TargetEnsemble ensemble_;
  PredictorState predictor_;
  InputNormalizer normalizer_;
};

// Binary checkpoint format (little-endian):
//   magic "DRNDCKPT", u32 format version (1), u32 record kind
//   (1 = mlp, 2 = ensemble, 3 = predictor), then the record.
//   mlp:       u32 activation, u64 seed, u32 n_dims, u32 dims[n_dims],
//              f64 params[] in flatten() order.
//   ensemble:  u32 mode, u32 count, mlp spec (as above, no params), then
//              count mlp records.
//   predictor: mlp record, f64 lr, beta1, beta2, epsilon, u64 step,
//              f64 first_moment[], f64 second_moment[] in flatten() order.
void save_mlp(std::ostream& out, const MlpParams& params);
MlpParams load_mlp(std::istream& in);
void save_ensemble(std::ostream& out, const TargetEnsemble& ensemble);
TargetEnsemble load_ensemble(std::istream& in);
void save_predictor(std::ostream& out, const PredictorState& pred);
PredictorState load_predictor(std::istream& in);

}  // namespace drnd
