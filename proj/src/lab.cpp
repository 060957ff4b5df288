#include "drnd/lab.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "drnd/error.hpp"
#include "drnd/rng.hpp"

namespace drnd::lab {

DiscreteTargetDist::DiscreteTargetDist(std::vector<Vector> values) : values_(std::move(values)) {
  if (values_.empty()) throw UsageError("target distribution needs at least one value");
  const auto d = values_.front().size();
  Vector s1 = Vector::Zero(d), s2 = Vector::Zero(d), s3 = Vector::Zero(d), s4 = Vector::Zero(d);
  for (const auto& v : values_) {
    if (v.size() != d) throw ShapeError("target distribution values differ in dimension");
    const Vector sq = v.cwiseProduct(v);
    s1 += v;
    s2 += sq;
    s3 += sq.cwiseProduct(v);
    s4 += sq.cwiseProduct(sq);
  }
  const double n = static_cast<double>(values_.size());
  mu_ = s1 / n;
  b2_ = s2 / n;
  b3_ = s3 / n;
  b4_ = s4 / n;
}

DiscreteTargetDist DiscreteTargetDist::scalar(const std::vector<double>& values) {
  std::vector<Vector> v;
  v.reserve(values.size());
  for (double x : values) v.push_back(Vector::Constant(1, x));
  return DiscreteTargetDist(std::move(v));
}

double DiscreteTargetDist::pooled_spread() const {
  return (b2_ - mu_.cwiseProduct(mu_)).sum();
}

Vector closed_form_fstar(std::span<const Vector> draws) {
  if (draws.empty()) throw UsageError("closed_form_fstar: no draws");
  Vector sum = Vector::Zero(draws.front().size());
  for (const auto& d : draws) {
    if (d.size() != sum.size()) throw ShapeError("closed_form_fstar: draws differ in dimension");
    sum += d;
  }
  return sum / static_cast<double>(draws.size());
}

double pseudo_count_y(const Vector& fstar, const DiscreteTargetDist& dist) {
  if (fstar.size() != dist.dim()) throw ShapeError("pseudo_count_y: dimension mismatch");
  const double spread = dist.pooled_spread();
  if (!(spread > 0.0)) throw DegenerateError("pseudo_count_y: degenerate target distribution");
  return (fstar.squaredNorm() - dist.mu().squaredNorm()) / spread;
}

MCReport MCReport::make(std::string id, std::string config, double estimate, double standard_error,
                        double analytic, std::uint64_t trials, double z) {
  MCReport r;
  r.id = std::move(id);
  r.config = std::move(config);
  r.estimate = estimate;
  r.standard_error = standard_error;
  r.analytic_value = analytic;
  r.trials = trials;
  r.z = z;
  r.pass = std::abs(estimate - analytic) <= z * standard_error;
  return r;
}

namespace {

// Shifted power sums; shifting by a value near the mean keeps the
// cancellation in the variance small.
struct PowerSums {
  std::uint64_t count = 0;
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;

  void push(double d) {
    const double d2 = d * d;
    count += 1;
    s1 += d;
    s2 += d2;
    s3 += d2 * d;
    s4 += d2 * d2;
  }
  void merge(const PowerSums& o) {
    count += o.count;
    s1 += o.s1;
    s2 += o.s2;
    s3 += o.s3;
    s4 += o.s4;
  }
};

SampleSummary summarize(const PowerSums& p, double shift) {
  SampleSummary s;
  s.trials = p.count;
  if (p.count == 0) return s;
  const double t = static_cast<double>(p.count);
  const double m1 = p.s1 / t, m2 = p.s2 / t, m3 = p.s3 / t, m4 = p.s4 / t;
  const double pop_var = std::max(m2 - m1 * m1, 0.0);
  s.mean = shift + m1;
  s.variance = p.count > 1 ? pop_var * t / (t - 1.0) : 0.0;
  s.fourth_central = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
  return s;
}

template <typename TrialFn>
SampleSummary run_trials(std::uint64_t trials, std::uint64_t seed, double shift, Exec exec,
                         TrialFn trial) {
  const std::size_t n_chunks = chunk_count(trials, kTrialsPerChunk);
  auto parts = map_chunks<PowerSums>(n_chunks, exec, [&](std::size_t c) {
    Rng rng(derive_seed(seed, c));
    const std::uint64_t begin = c * kTrialsPerChunk;
    const std::uint64_t end = std::min<std::uint64_t>(trials, begin + kTrialsPerChunk);
    PowerSums acc;
    for (std::uint64_t t = begin; t < end; ++t) acc.push(trial(rng) - shift);
    return acc;
  });
  PowerSums total;
  for (const auto& p : parts) total.merge(p);
  return summarize(total, shift);
}

}  // namespace

SampleSummary sample_pseudo_count(const DiscreteTargetDist& dist, int n, std::uint64_t trials,
                                  std::uint64_t seed, Exec exec) {
  if (n < 1) throw UsageError("sample_pseudo_count: n must be >= 1");
  const double spread = dist.pooled_spread();
  if (!(spread > 0.0)) throw DegenerateError("sample_pseudo_count: degenerate target distribution");
  const double mu_sq = dist.mu().squaredNorm();
  const auto& values = dist.values();
  const auto count = static_cast<std::size_t>(dist.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  return run_trials(trials, seed, inv_n, exec, [&](Rng& rng) {
    Vector sum = Vector::Zero(dist.dim());
    for (int k = 0; k < n; ++k) sum += values[rng.index(count)];
    const Vector fstar = sum * inv_n;
    return (fstar.squaredNorm() - mu_sq) / spread;
  });
}

MCReport mc_unbiasedness(const DiscreteTargetDist& dist, int n, std::uint64_t trials,
                         std::uint64_t seed, Exec exec) {
  if (trials < 10'000) throw UsageError("mc_unbiasedness: at least 10^4 trials required");
  const SampleSummary s = sample_pseudo_count(dist, n, trials, seed, exec);
  std::ostringstream cfg;
  cfg << "N=" << dist.size() << ";d=" << dist.dim() << ";n=" << n;
  return MCReport::make("unbiasedness", cfg.str(), s.mean,
                        std::sqrt(s.variance / static_cast<double>(s.trials)), 1.0 / n, s.trials);
}

std::string to_string(VarianceRoute route) {
  switch (route) {
    case VarianceRoute::moments: return "moments";
    case VarianceRoute::printed_polynomial: return "printed_polynomial";
    case VarianceRoute::rederived_polynomial: return "rederived_polynomial";
  }
  return "unknown";
}

double variance_of_y(const DiscreteTargetDist& dist, int n, VarianceRoute route) {
  if (dist.dim() != 1) throw ShapeError("variance_of_y: scalar-output distribution required");
  if (n < 1) throw UsageError("variance_of_y: n must be >= 1");
  const double mu = dist.mu()(0), b2 = dist.b2()(0), b3 = dist.b3()(0), b4 = dist.b4()(0);
  const double spread = b2 - mu * mu;
  if (!(spread > 0.0)) throw DegenerateError("variance_of_y: degenerate target distribution");
  const double nn = static_cast<double>(n);
  if (route == VarianceRoute::moments) {
    // Falling factorials A_n^i = n! / (n - i)!
    const double a2 = nn * (nn - 1.0);
    const double a3 = a2 * (nn - 2.0);
    const double a4 = a3 * (nn - 3.0);
    const double n4 = nn * nn * nn * nn;
    const double ef4 = (nn * b4 + 4.0 * a2 * mu * b3 + 3.0 * a2 * b2 * b2 + 6.0 * a3 * mu * mu * b2 +
                        a4 * mu * mu * mu * mu) / n4;
    const double ef2 = b2 / nn + (nn - 1.0) / nn * mu * mu;
    return (ef4 - ef2 * ef2) / (spread * spread);
  }
  const double k1 = 1.0;
  const double k2 = 4.0 * nn - 4.0;
  const double k3 = 2.0 * nn - 3.0;
  const double k4 = 4.0 * nn * nn - 16.0 * nn + 12.0;
  const double k5 = route == VarianceRoute::printed_polynomial ? -5.0 * nn * nn + 10.0 * nn - 6.0
                                                               : -4.0 * nn * nn + 10.0 * nn - 6.0;
  const double numerator = k1 * b4 + k2 * mu * b3 + k3 * b2 * b2 + k4 * mu * mu * b2 + k5 * mu * mu * mu * mu;
  return numerator / (nn * nn * nn * spread * spread);
}

MCReport mc_variance(const DiscreteTargetDist& dist, int n, std::uint64_t trials, std::uint64_t seed,
                     Exec exec) {
  const SampleSummary s = sample_pseudo_count(dist, n, trials, seed, exec);
  const double analytic = variance_of_y(dist, n, VarianceRoute::moments);
  // Var(s^2) = (mu4 - sigma^4 (t - 3) / (t - 1)) / t. The plug-in mu4 is
  // floored at sigma^4 (kurtosis >= 1): for a symmetric two-point y the
  // sample fourth moment equals m2^2 and the estimate would collapse to 0.
  const double t = static_cast<double>(s.trials);
  const double v2 = s.variance * s.variance;
  const double mu4 = std::max(s.fourth_central, v2);
  const double se = std::sqrt(std::max(mu4 - v2 * (t - 3.0) / (t - 1.0), 0.0) / t);
  std::ostringstream cfg;
  cfg << "N=" << dist.size() << ";n=" << n;
  return MCReport::make("variance", cfg.str(), s.variance, se, analytic, s.trials);
}

std::string Lemma1Config::summary() const {
  std::ostringstream out;
  out << "d=" << dim() << ";N=" << num_targets << ";x=[";
  for (Eigen::Index i = 0; i < x.size(); ++i) out << (i ? " " : "") << x(i);
  out << "];diag(Sigma)=[";
  for (Eigen::Index i = 0; i < theta_cov.rows(); ++i) out << (i ? " " : "") << theta_cov(i, i);
  out << "]";
  return out.str();
}

double lemma1_analytic(const Lemma1Config& cfg) {
  return (1.0 + 1.0 / cfg.num_targets) * cfg.x.dot(cfg.theta_cov * cfg.x);
}

MCReport mc_lemma1(const Lemma1Config& cfg, std::uint64_t seed, Exec exec) {
  const int d = cfg.dim();
  if (cfg.num_targets < 1) throw ConfigError("lemma1: num_targets must be >= 1");
  if (cfg.theta_mean.size() != d || cfg.theta_cov.rows() != d || cfg.theta_cov.cols() != d) {
    throw ShapeError("lemma1: mean/covariance do not match dim(x)");
  }
  if (!cfg.theta_cov.isApprox(cfg.theta_cov.transpose(), 1e-12)) {
    throw ConfigError("lemma1: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cfg.theta_cov);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw ConfigError("lemma1: covariance is not positive semidefinite");
  }
  // Sigma = L L^T with L = V sqrt(Lambda), valid for semidefinite Sigma.
  const Matrix factor =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const double analytic = lemma1_analytic(cfg);
  const double inv_n = 1.0 / cfg.num_targets;
  const SampleSummary s = run_trials(cfg.trials, seed, analytic, exec, [&](Rng& rng) {
    auto draw_projection = [&]() {
      Vector z(d);
      for (int i = 0; i < d; ++i) z(i) = rng.normal();
      const Vector theta = cfg.theta_mean + factor * z;
      return theta.dot(cfg.x);
    };
    const double predictor = draw_projection();
    double target_sum = 0.0;
    for (int i = 0; i < cfg.num_targets; ++i) target_sum += draw_projection();
    const double err = predictor - target_sum * inv_n;
    return err * err;
  });
  return MCReport::make("linear-model", cfg.summary(), s.mean,
                        std::sqrt(s.variance / static_cast<double>(s.trials)), analytic, s.trials);
}

double lemma2_gap(double sigma2, int num_targets, const Vector& x1, const Vector& x2) {
  if (!(sigma2 > 0.0)) throw ConfigError("lemma2: sigma2 must be > 0");
  if (num_targets < 1) throw ConfigError("lemma2: num_targets must be >= 1");
  const double n = static_cast<double>(num_targets);
  return ((1.0 + n) * sigma2 / n) * (x2.squaredNorm() - x1.squaredNorm());
}

}  // namespace drnd::lab
