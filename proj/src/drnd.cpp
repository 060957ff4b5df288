#include "drnd/drnd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "drnd/error.hpp"

namespace drnd {

std::string to_string(TargetMode mode) {
  return mode == TargetMode::rademacher ? "rademacher" : "random_mlp";
}

TargetMode target_mode_from_string(const std::string& name) {
  if (name == "random_mlp") return TargetMode::random_mlp;
  if (name == "rademacher") return TargetMode::rademacher;
  throw ConfigError("unknown target mode '" + name + "'");
}

// ---------------------------------------------------------------------------
// TargetEnsemble

TargetEnsemble TargetEnsemble::create(const MlpSpec& spec, int count, TargetMode mode,
                                      std::uint64_t seed) {
  spec.validate();
  if (count < 1) throw ConfigError("ensemble size must be >= 1, got " + std::to_string(count));
  if (mode == TargetMode::rademacher && count != 2) {
    throw ConfigError("rademacher ensemble must have exactly 2 targets, got " + std::to_string(count));
  }
  TargetEnsemble ens;
  ens.spec_ = spec;
  ens.spec_.seed = seed;
  ens.mode_ = mode;
  ens.count_ = count;
  if (mode == TargetMode::random_mlp) {
    ens.targets_.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      MlpSpec s = spec;
      s.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
      ens.targets_.push_back(mlp_init(s));
    }
  }
  return ens;
}

TargetEnsemble TargetEnsemble::from_targets(std::vector<MlpParams> targets) {
  if (targets.empty()) throw ConfigError("ensemble size must be >= 1, got 0");
  for (const auto& t : targets) {
    if (t.spec.layer_dims.front() != targets.front().spec.layer_dims.front() ||
        t.spec.layer_dims.back() != targets.front().spec.layer_dims.back()) {
      throw ShapeError("ensemble targets disagree on input/output dims");
    }
  }
  TargetEnsemble ens;
  ens.spec_ = targets.front().spec;
  ens.mode_ = TargetMode::random_mlp;
  ens.count_ = static_cast<int>(targets.size());
  ens.targets_ = std::move(targets);
  return ens;
}

Vector TargetEnsemble::output(int i, const Vector& x) const {
  if (x.size() != input_dim()) {
    throw ShapeError("ensemble input has length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(input_dim()));
  }
  if (mode_ == TargetMode::rademacher) {
    return Vector::Constant(output_dim(), i == 0 ? -1.0 : 1.0);
  }
  return mlp_forward(targets_[static_cast<std::size_t>(i)], x);
}

Matrix TargetEnsemble::output_batch(int i, const Matrix& inputs) const {
  if (inputs.rows() != input_dim()) {
    throw ShapeError("ensemble input has " + std::to_string(inputs.rows()) + " rows, expected " +
                     std::to_string(input_dim()));
  }
  if (mode_ == TargetMode::rademacher) {
    return Matrix::Constant(output_dim(), inputs.cols(), i == 0 ? -1.0 : 1.0);
  }
  return mlp_forward_batch(targets_[static_cast<std::size_t>(i)], inputs);
}

MomentSet TargetEnsemble::moments(const Vector& x) const {
  Vector sum = Vector::Zero(output_dim());
  Vector sum_sq = Vector::Zero(output_dim());
  for (int i = 0; i < count_; ++i) {
    const Vector out = output(i, x);
    sum += out;
    sum_sq += out.cwiseProduct(out);
  }
  const double n = static_cast<double>(count_);
  return {sum / n, sum_sq / n};
}

MomentBatch TargetEnsemble::moments_batch(const Matrix& inputs) const {
  Matrix sum = Matrix::Zero(output_dim(), inputs.cols());
  Matrix sum_sq = Matrix::Zero(output_dim(), inputs.cols());
  for (int i = 0; i < count_; ++i) {
    const Matrix out = output_batch(i, inputs);
    sum += out;
    sum_sq += out.cwiseProduct(out);
  }
  const double n = static_cast<double>(count_);
  return {sum / n, sum_sq / n};
}

Vector TargetEnsemble::sample_c(const Vector& x, Rng& rng) const {
  return output(sample_index(rng), x);
}

std::uint64_t TargetEnsemble::fingerprint() const {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(count_) ^
                               (static_cast<std::uint64_t>(mode_) << 32));
  for (const auto& t : targets_) h = splitmix64(h ^ drnd::fingerprint(t));
  return h;
}

// ---------------------------------------------------------------------------
// Predictor

PredictorState PredictorState::create(const MlpSpec& spec, AdamConfig adam) {
  PredictorState p;
  p.net = mlp_init(spec);
  p.optimizer = AdamState(p.net, adam);
  return p;
}

double distill_step_weighted(PredictorState& pred, const Matrix& inputs, const Matrix& targets,
                             const Vector& weights) {
  if (inputs.cols() == 0) throw UsageError("distill_step: empty batch");
  if (targets.rows() != pred.net.output_dim() || targets.cols() != inputs.cols() ||
      weights.size() != inputs.cols()) {
    throw ShapeError("distill_step: targets/weights do not match the batch");
  }
  ForwardCache cache;
  const Matrix out = mlp_forward_batch(pred.net, inputs, &cache);
  const Matrix diff = out - targets;
  const double weight_sum = weights.sum();
  const double loss = (diff.colwise().squaredNorm().transpose().cwiseProduct(weights)).sum() / weight_sum;
  if (!std::isfinite(loss)) throw NumericError("distill_step: non-finite loss");
  Matrix upstream = diff * (2.0 / weight_sum);
  upstream.array().rowwise() *= weights.transpose().array();
  const auto back = mlp_backward_batch(pred.net, cache, upstream);
  adam_step(pred.optimizer, pred.net, back.grads);
  return loss;
}

double distill_step(PredictorState& pred, const Matrix& inputs, const Matrix& targets) {
  return distill_step_weighted(pred, inputs, targets, Vector::Ones(inputs.cols()));
}

// ---------------------------------------------------------------------------
// Bonuses

void BonusConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  if (!(denom_epsilon > 0.0)) {
    throw ConfigError("denom_epsilon must be > 0, got " + std::to_string(denom_epsilon));
  }
  if (ratio_upper_clamp && !(*ratio_upper_clamp > 0.0)) {
    throw ConfigError("ratio_upper_clamp must be > 0");
  }
}

double bonus_b1(const Vector& prediction, const MomentSet& moments) {
  if (prediction.size() != moments.mu.size()) throw ShapeError("bonus_b1: size mismatch");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < prediction.size(); ++j) {
    const double d = prediction(j) - moments.mu(j);
    sum += d * d;
  }
  return sum;
}

double bonus_b2(const Vector& prediction, const MomentSet& moments, const BonusConfig& cfg) {
  if (prediction.size() != moments.mu.size() || moments.b2.size() != moments.mu.size()) {
    throw ShapeError("bonus_b2: size mismatch");
  }
  double numerator = 0.0;
  double denominator = 0.0;
  for (Eigen::Index j = 0; j < prediction.size(); ++j) {
    const double mu_sq = moments.mu(j) * moments.mu(j);
    numerator += prediction(j) * prediction(j) - mu_sq;
    denominator += moments.b2(j) - mu_sq;
  }
  double ratio = 0.0;
  if (cfg.clamp_negative_numerator) {
    ratio = std::max(numerator, 0.0) / std::max(denominator, cfg.denom_epsilon);
  } else {
    if (!(denominator >= cfg.denom_epsilon)) {
      throw DegenerateError("bonus_b2: ensemble spread " + std::to_string(denominator) +
                            " is below denom_epsilon");
    }
    ratio = numerator / denominator;
    if (ratio < 0.0) throw NumericError("bonus_b2: negative pseudo-count ratio");
  }
  if (cfg.ratio_upper_clamp) ratio = std::min(ratio, *cfg.ratio_upper_clamp);
  return std::sqrt(ratio);
}

double bonus_total(double b1, double b2, const BonusConfig& cfg) {
  return cfg.alpha * b1 + (1.0 - cfg.alpha) * b2;
}

double bonus_b1(const PredictorState& pred, const MomentSet& moments, const Vector& x) {
  return bonus_b1(mlp_forward(pred.net, x), moments);
}

double bonus_b2(const PredictorState& pred, const MomentSet& moments, const Vector& x,
                const BonusConfig& cfg) {
  return bonus_b2(mlp_forward(pred.net, x), moments, cfg);
}

// ---------------------------------------------------------------------------
// Normalizers

void RunningStats::push(double value) {
  count_ += 1;
  const double delta = value - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (value - mean_);
}

RunningNormalizer::RunningNormalizer(double gamma, std::size_t streams, double std_floor)
    : gamma_(gamma), std_floor_(std_floor), discounted_(streams, 0.0) {
  if (streams == 0) throw ConfigError("RunningNormalizer needs at least one stream");
}

double RunningNormalizer::stddev() const {
  return std::max(std::sqrt(stats_.variance()), std_floor_);
}

std::vector<double> RunningNormalizer::normalize(std::span<const double> rewards) {
  auto out = normalize_streams({std::vector<double>(rewards.begin(), rewards.end())});
  return out.front();
}

std::vector<std::vector<double>> RunningNormalizer::normalize_streams(
    const std::vector<std::vector<double>>& rewards) {
  if (rewards.size() > discounted_.size()) {
    throw ShapeError("RunningNormalizer: " + std::to_string(rewards.size()) + " streams, configured " +
                     std::to_string(discounted_.size()));
  }
  std::size_t steps = 0;
  for (const auto& s : rewards) steps = std::max(steps, s.size());
  // Time-major update so interleaved streams contribute in step order.
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t s = 0; s < rewards.size(); ++s) {
      if (t >= rewards[s].size()) continue;
      const double r = rewards[s][t];
      if (!std::isfinite(r)) throw NumericError("RunningNormalizer: non-finite reward");
      discounted_[s] = gamma_ * discounted_[s] + r;
      stats_.push(discounted_[s]);
    }
  }
  const double sd = stddev();
  std::vector<std::vector<double>> out(rewards.size());
  for (std::size_t s = 0; s < rewards.size(); ++s) {
    out[s].reserve(rewards[s].size());
    for (double r : rewards[s]) out[s].push_back(r / sd);
  }
  return out;
}

InputNormalizer::InputNormalizer(int dim, double clip)
    : mean_(Vector::Zero(dim)), m2_(Vector::Zero(dim)), clip_(clip) {}

void InputNormalizer::update(const Matrix& inputs) {
  if (inputs.cols() == 0) return;
  if (inputs.rows() != mean_.size()) throw ShapeError("InputNormalizer: dim mismatch");
  const double n_b = static_cast<double>(inputs.cols());
  const Vector batch_mean = inputs.rowwise().mean();
  const Vector batch_m2 = (inputs.colwise() - batch_mean).rowwise().squaredNorm();
  const double total = count_ + n_b;
  const Vector delta = batch_mean - mean_;
  mean_ += delta * (n_b / total);
  m2_ += batch_m2 + delta.cwiseProduct(delta) * (count_ * n_b / total);
  count_ = total;
}

Vector InputNormalizer::stddev() const {
  if (count_ <= 0.0) return Vector::Ones(mean_.size());
  return ((m2_ / count_).array() + 1e-8).sqrt().matrix();
}

Vector InputNormalizer::apply(const Vector& x) const {
  Matrix m = x;
  return apply_batch(m).col(0);
}

Matrix InputNormalizer::apply_batch(const Matrix& inputs) const {
  if (inputs.rows() != mean_.size()) throw ShapeError("InputNormalizer: dim mismatch");
  const Vector sd = stddev();
  Matrix out = (inputs.colwise() - mean_).array().colwise() / sd.array();
  return out.cwiseMax(-clip_).cwiseMin(clip_);
}

Matrix InputNormalizer::jacobian_diag(const Matrix& inputs) const {
  const Vector sd = stddev();
  Matrix z = (inputs.colwise() - mean_).array().colwise() / sd.array();
  Matrix jac(inputs.rows(), inputs.cols());
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
      jac(r, c) = std::abs(z(r, c)) < clip_ ? 1.0 / sd(r) : 0.0;
    }
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Drnd

void DrndConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("drnd input/output dims must be >= 1");
  if (num_targets < 1) throw ConfigError("num_targets must be >= 1, got " + std::to_string(num_targets));
  if (mode == TargetMode::rademacher && num_targets != 2) {
    throw ConfigError("rademacher mode requires num_targets = 2");
  }
  bonus.validate();
  if (!(adam.lr > 0.0)) throw ConfigError("drnd learning rate must be > 0");
}

MlpSpec DrndConfig::predictor_spec(std::uint64_t seed) const {
  MlpSpec s;
  s.layer_dims.push_back(input_dim);
  s.layer_dims.insert(s.layer_dims.end(), predictor_hidden.begin(), predictor_hidden.end());
  s.layer_dims.push_back(output_dim);
  s.activation = activation;
  s.init = init;
  s.seed = seed;
  return s;
}

MlpSpec DrndConfig::target_spec() const {
  MlpSpec s;
  s.layer_dims.push_back(input_dim);
  s.layer_dims.insert(s.layer_dims.end(), target_hidden.begin(), target_hidden.end());
  s.layer_dims.push_back(output_dim);
  s.activation = activation;
  s.init = init;
  return s;
}

Drnd::Drnd(const DrndConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  ensemble_ = TargetEnsemble::create(cfg_.target_spec(), cfg_.num_targets, cfg_.mode,
                                     derive_seed(seed, stream::kTargets));
  predictor_ = PredictorState::create(cfg_.predictor_spec(derive_seed(seed, stream::kPredictor)), cfg_.adam);
  normalizer_ = InputNormalizer(cfg_.input_dim, cfg_.input_clip);
}

Drnd::Drnd(const DrndConfig& cfg, TargetEnsemble ensemble, PredictorState predictor)
    : cfg_(cfg), ensemble_(std::move(ensemble)), predictor_(std::move(predictor)) {
  cfg_.validate();
  if (ensemble_.input_dim() != predictor_.net.input_dim() ||
      ensemble_.output_dim() != predictor_.net.output_dim()) {
    throw ShapeError("predictor and ensemble disagree on input/output dims");
  }
  normalizer_ = InputNormalizer(ensemble_.input_dim(), cfg_.input_clip);
}

Matrix Drnd::prepare(const Matrix& inputs) const {
  if (inputs.rows() != ensemble_.input_dim()) {
    throw ShapeError("drnd input has " + std::to_string(inputs.rows()) + " rows, expected " +
                     std::to_string(ensemble_.input_dim()));
  }
  return cfg_.normalize_inputs ? normalizer_.apply_batch(inputs) : inputs;
}

BonusTerms Drnd::bonus(const Vector& x) const {
  const Vector xn = cfg_.normalize_inputs ? normalizer_.apply(x) : x;
  const Vector f = mlp_forward(predictor_.net, xn);
  const MomentSet mom = ensemble_.moments(xn);
  BonusTerms t;
  t.b1 = bonus_b1(f, mom);
  t.b2 = bonus_b2(f, mom, cfg_.bonus);
  t.total = bonus_total(t.b1, t.b2, cfg_.bonus);
  return t;
}

BonusBatch Drnd::bonus_batch(const Matrix& inputs, Exec exec) const {
  const Matrix xn = prepare(inputs);
  const auto cols = static_cast<std::size_t>(xn.cols());
  const std::size_t n_chunks = chunk_count(cols, kChunkColumns);
  auto parts = map_chunks<BonusBatch>(n_chunks, exec, [&](std::size_t c) {
    const auto begin = static_cast<Eigen::Index>(c * kChunkColumns);
    const auto width = static_cast<Eigen::Index>(std::min(kChunkColumns, cols - c * kChunkColumns));
    const Matrix block = xn.middleCols(begin, width);
    const Matrix f = mlp_forward_batch(predictor_.net, block);
    const MomentBatch mom = ensemble_.moments_batch(block);
    BonusBatch part{Vector(width), Vector(width), Vector(width)};
    for (Eigen::Index k = 0; k < width; ++k) {
      const MomentSet m{mom.mu.col(k), mom.b2.col(k)};
      const Vector fk = f.col(k);
      part.b1(k) = bonus_b1(fk, m);
      part.b2(k) = bonus_b2(fk, m, cfg_.bonus);
      part.total(k) = bonus_total(part.b1(k), part.b2(k), cfg_.bonus);
    }
    return part;
  });
  BonusBatch out{Vector(xn.cols()), Vector(xn.cols()), Vector(xn.cols())};
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.b1.segment(offset, p.b1.size()) = p.b1;
    out.b2.segment(offset, p.b2.size()) = p.b2;
    out.total.segment(offset, p.total.size()) = p.total;
    offset += p.b1.size();
  }
  return out;
}

Matrix Drnd::total_bonus_input_grad(const Matrix& inputs) const {
  const Matrix xn = prepare(inputs);
  const Eigen::Index batch = xn.cols();
  const int n = ensemble_.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto& bcfg = cfg_.bonus;

  ForwardCache pred_cache;
  const Matrix f = mlp_forward_batch(predictor_.net, xn, &pred_cache);
  std::vector<ForwardCache> target_caches(static_cast<std::size_t>(n));
  std::vector<Matrix> target_out(static_cast<std::size_t>(n));
  Matrix sum = Matrix::Zero(f.rows(), batch);
  Matrix sum_sq = Matrix::Zero(f.rows(), batch);
  for (int i = 0; i < n; ++i) {
    auto& out = target_out[static_cast<std::size_t>(i)];
    if (ensemble_.mode() == TargetMode::rademacher) {
      out = ensemble_.output_batch(i, xn);
    } else {
      out = mlp_forward_batch(ensemble_.targets()[static_cast<std::size_t>(i)], xn,
                              &target_caches[static_cast<std::size_t>(i)]);
    }
    sum += out;
    sum_sq += out.cwiseProduct(out);
  }
  const Matrix mu = sum * inv_n;
  const Matrix b2 = sum_sq * inv_n;

  Matrix d_f = Matrix::Zero(f.rows(), batch);
  Matrix d_mu = Matrix::Zero(f.rows(), batch);
  Matrix d_b2 = Matrix::Zero(f.rows(), batch);
  for (Eigen::Index k = 0; k < batch; ++k) {
    const Vector diff = f.col(k) - mu.col(k);
    d_f.col(k) += bcfg.alpha * 2.0 * diff;
    d_mu.col(k) -= bcfg.alpha * 2.0 * diff;

    double numerator = 0.0;
    double denominator = 0.0;
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
      const double mu_sq = mu(j, k) * mu(j, k);
      numerator += f(j, k) * f(j, k) - mu_sq;
      denominator += b2(j, k) - mu_sq;
    }
    const bool floored = denominator < bcfg.denom_epsilon;
    const double den = floored ? bcfg.denom_epsilon : denominator;
    const double ratio = numerator / den;
    if (ratio <= 0.0) continue;
    if (bcfg.ratio_upper_clamp && ratio >= *bcfg.ratio_upper_clamp) continue;
    const double g = (1.0 - bcfg.alpha) / (2.0 * std::sqrt(ratio));
    d_f.col(k) += g * (2.0 / den) * f.col(k);
    d_mu.col(k) += g * (-2.0 / den) * mu.col(k);
    if (!floored) {
      d_mu.col(k) += g * (2.0 * numerator / (den * den)) * mu.col(k);
      d_b2.col(k).array() += g * (-numerator / (den * den));
    }
  }

  Matrix grad = mlp_backward_batch(predictor_.net, pred_cache, d_f).input_grads;
  if (ensemble_.mode() == TargetMode::random_mlp) {
    for (int i = 0; i < n; ++i) {
      const auto& out = target_out[static_cast<std::size_t>(i)];
      const Matrix upstream = d_mu * inv_n + d_b2.cwiseProduct(out) * (2.0 * inv_n);
      grad += mlp_backward_batch(ensemble_.targets()[static_cast<std::size_t>(i)],
                                 target_caches[static_cast<std::size_t>(i)], upstream)
                  .input_grads;
    }
  }
  if (cfg_.normalize_inputs) grad = grad.cwiseProduct(normalizer_.jacobian_diag(inputs));
  return grad;
}

double Drnd::distill(const Matrix& inputs, Rng& rng) {
  const Matrix xn = prepare(inputs);
  const Eigen::Index batch = xn.cols();
  std::vector<int> draw(static_cast<std::size_t>(batch));
  for (auto& d : draw) d = ensemble_.sample_index(rng);
  Matrix targets(ensemble_.output_dim(), batch);
  for (int i = 0; i < ensemble_.size(); ++i) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = 0; k < batch; ++k) {
      if (draw[static_cast<std::size_t>(k)] == i) cols.push_back(k);
    }
    if (cols.empty()) continue;
    Matrix group(xn.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t q = 0; q < cols.size(); ++q) group.col(static_cast<Eigen::Index>(q)) = xn.col(cols[q]);
    const Matrix out = ensemble_.output_batch(i, group);
    for (std::size_t q = 0; q < cols.size(); ++q) targets.col(cols[q]) = out.col(static_cast<Eigen::Index>(q));
  }
  return distill_step(predictor_, xn, targets);
}

double Drnd::expected_loss(const Matrix& inputs) const {
  const Matrix xn = prepare(inputs);
  if (xn.cols() == 0) return 0.0;
  const Matrix f = mlp_forward_batch(predictor_.net, xn);
  const MomentBatch mom = ensemble_.moments_batch(xn);
  const Matrix spread = mom.b2 - mom.mu.cwiseProduct(mom.mu);
  return ((f - mom.mu).colwise().squaredNorm().sum() + spread.sum()) / static_cast<double>(xn.cols());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

constexpr char kMagic[8] = {'D', 'R', 'N', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;
enum : std::uint32_t { kKindMlp = 1, kKindEnsemble = 2, kKindPredictor = 3 };

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw UsageError("checkpoint truncated");
  return value;
}

void put_doubles(std::ostream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& in, std::size_t n) {
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw UsageError("checkpoint truncated");
  return values;
}

void put_header(std::ostream& out, std::uint32_t kind) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, kind);
}

void expect_header(std::istream& in, std::uint32_t kind) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw UsageError("not a drnd checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw UsageError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto got = get<std::uint32_t>(in);
  if (got != kind) throw UsageError("checkpoint holds record kind " + std::to_string(got));
}

void put_spec(std::ostream& out, const MlpSpec& spec) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.activation));
  put<std::uint64_t>(out, spec.seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.layer_dims.size()));
  for (int d : spec.layer_dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
}

MlpSpec get_spec(std::istream& in) {
  MlpSpec spec;
  const auto act = get<std::uint32_t>(in);
  if (act > 2) throw UsageError("checkpoint has unknown activation");
  spec.activation = static_cast<Activation>(act);
  spec.seed = get<std::uint64_t>(in);
  const auto n = get<std::uint32_t>(in);
  if (n < 2 || n > 64) throw UsageError("checkpoint has implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) spec.layer_dims.push_back(static_cast<int>(get<std::uint32_t>(in)));
  spec.validate();
  return spec;
}

std::vector<DenseLayer> shaped_layers(const MlpSpec& spec) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
    layers.push_back({Matrix::Zero(spec.layer_dims[l + 1], spec.layer_dims[l]),
                      Vector::Zero(spec.layer_dims[l + 1])});
  }
  return layers;
}

std::size_t flat_size(const std::vector<DenseLayer>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void put_mlp_body(std::ostream& out, const MlpParams& params) {
  put_spec(out, params.spec);
  put_doubles(out, flatten(params.layers));
}

MlpParams get_mlp_body(std::istream& in) {
  MlpParams params;
  params.spec = get_spec(in);
  params.layers = shaped_layers(params.spec);
  unflatten(get_doubles(in, flat_size(params.layers)), params.layers);
  return params;
}

}  // namespace

void save_mlp(std::ostream& out, const MlpParams& params) {
  put_header(out, kKindMlp);
  put_mlp_body(out, params);
}

MlpParams load_mlp(std::istream& in) {
  expect_header(in, kKindMlp);
  return get_mlp_body(in);
}

void save_ensemble(std::ostream& out, const TargetEnsemble& ensemble) {
  put_header(out, kKindEnsemble);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ensemble.mode()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ensemble.size()));
  put_spec(out, ensemble.spec());
  for (const auto& t : ensemble.targets()) put_mlp_body(out, t);
}

TargetEnsemble load_ensemble(std::istream& in) {
  expect_header(in, kKindEnsemble);
  const auto mode = get<std::uint32_t>(in);
  if (mode > 1) throw UsageError("checkpoint has unknown target mode");
  const auto count = get<std::uint32_t>(in);
  const MlpSpec spec = get_spec(in);
  if (static_cast<TargetMode>(mode) == TargetMode::rademacher) {
    return TargetEnsemble::create(spec, static_cast<int>(count), TargetMode::rademacher, spec.seed);
  }
  std::vector<MlpParams> targets;
  for (std::uint32_t i = 0; i < count; ++i) targets.push_back(get_mlp_body(in));
  auto ens = TargetEnsemble::from_targets(std::move(targets));
  return ens;
}

void save_predictor(std::ostream& out, const PredictorState& pred) {
  put_header(out, kKindPredictor);
  put_mlp_body(out, pred.net);
  const auto& cfg = pred.optimizer.config;
  put<double>(out, cfg.lr);
  put<double>(out, cfg.beta1);
  put<double>(out, cfg.beta2);
  put<double>(out, cfg.epsilon);
  put<std::uint64_t>(out, pred.optimizer.step);
  put_doubles(out, flatten(pred.optimizer.first_moment.layers));
  put_doubles(out, flatten(pred.optimizer.second_moment.layers));
}

PredictorState load_predictor(std::istream& in) {
  expect_header(in, kKindPredictor);
  PredictorState pred;
  pred.net = get_mlp_body(in);
  AdamConfig cfg;
  cfg.lr = get<double>(in);
  cfg.beta1 = get<double>(in);
  cfg.beta2 = get<double>(in);
  cfg.epsilon = get<double>(in);
  pred.optimizer = AdamState(pred.net, cfg);
  pred.optimizer.step = get<std::uint64_t>(in);
  const std::size_t n = flat_size(pred.optimizer.first_moment.layers);
  unflatten(get_doubles(in, n), pred.optimizer.first_moment.layers);
  unflatten(get_doubles(in, n), pred.optimizer.second_moment.layers);
  return pred;
}

}  // namespace drnd
