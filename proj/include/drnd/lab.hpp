#pragma once

// Network-free checks of the DRND estimator mathematics.
//
// With the predictor replaced by its closed-form optimum (the mean of the n
// target draws seen at x), the pooled statistic
//
//   y = (||f*||^2 - ||mu||^2) / (sum B2 - ||mu||^2)
//
// is an unbiased estimator of 1/n. This module samples it, evaluates its
// variance two ways, and checks the linear-model expectation of the first
// bonus under Gaussian parameters.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drnd/nn.hpp"
#include "drnd/parallel.hpp"

namespace drnd::lab {

// The N target outputs at one fixed input, plus raw moments up to order 4
// (element-wise).
class DiscreteTargetDist {
 public:
  explicit DiscreteTargetDist(std::vector<Vector> values);
  static DiscreteTargetDist scalar(const std::vector<double>& values);

  int size() const { return static_cast<int>(values_.size()); }
  int dim() const { return static_cast<int>(mu_.size()); }
  const std::vector<Vector>& values() const { return values_; }
  const Vector& mu() const { return mu_; }
  const Vector& b2() const { return b2_; }
  const Vector& b3() const { return b3_; }
  const Vector& b4() const { return b4_; }

  // sum_j (B2_j - mu_j^2); zero for a degenerate distribution.
  double pooled_spread() const;

 private:
  std::vector<Vector> values_;
  Vector mu_, b2_, b3_, b4_;
};

// Element-wise mean of the draws. Throws UsageError when empty.
Vector closed_form_fstar(std::span<const Vector> draws);

// Raw pooled statistic, no clamping. Throws DegenerateError when the pooled
// spread is not positive.
double pseudo_count_y(const Vector& fstar, const DiscreteTargetDist& dist);

struct MCReport {
  std::string id;
  std::string config;
  double estimate = 0.0;
  double standard_error = 0.0;
  double analytic_value = 0.0;
  std::uint64_t trials = 0;
  double z = 3.0;
  bool pass = false;

  // pass <=> |estimate - analytic| <= z * standard_error
  static MCReport make(std::string id, std::string config, double estimate, double standard_error,
                       double analytic, std::uint64_t trials, double z = 3.0);
  double ratio() const { return analytic_value != 0.0 ? estimate / analytic_value : 0.0; }
};

// Moments of a sampled statistic.
struct SampleSummary {
  std::uint64_t trials = 0;
  double mean = 0.0;
  double variance = 0.0;          // unbiased sample variance
  double fourth_central = 0.0;    // population fourth central moment
};

inline constexpr std::uint64_t kTrialsPerChunk = 16384;

// Samples y over `trials` independent experiments of n draws each. Trials
// are split in chunks of kTrialsPerChunk seeded with derive_seed(seed, chunk).
SampleSummary sample_pseudo_count(const DiscreteTargetDist& dist, int n, std::uint64_t trials,
                                  std::uint64_t seed, Exec exec = Exec::parallel);

// Monte Carlo mean of y against 1/n. Requires n >= 1, trials >= 10^4.
MCReport mc_unbiasedness(const DiscreteTargetDist& dist, int n, std::uint64_t trials,
                         std::uint64_t seed, Exec exec = Exec::parallel);

enum class VarianceRoute {
  moments,               // E[f*^4] from the falling-factorial expansion minus E[f*^2]^2
  printed_polynomial,    // K1..K5 with K5 = -5n^2 + 10n - 6
  rederived_polynomial,  // K1..K5 with K5 = -4n^2 + 10n - 6
};

std::string to_string(VarianceRoute route);

// Var[y] for a scalar distribution. Throws ShapeError for dim != 1.
double variance_of_y(const DiscreteTargetDist& dist, int n, VarianceRoute route);

// Monte Carlo sample variance of y against the moment route.
MCReport mc_variance(const DiscreteTargetDist& dist, int n, std::uint64_t trials, std::uint64_t seed,
                     Exec exec = Exec::parallel);

struct Lemma1Config {
  int num_targets = 4;
  Vector theta_mean;
  Matrix theta_cov;
  Vector x;
  std::uint64_t trials = 1'000'000;

  int dim() const { return static_cast<int>(x.size()); }
  std::string summary() const;
};

// (1 + 1/N) x^T Sigma x
double lemma1_analytic(const Lemma1Config& cfg);

// Samples predictor and N target parameter vectors from N(mean, Sigma) per
// trial and averages (theta~^T x - mean_i theta_i^T x)^2. Throws ConfigError
// when Sigma is not symmetric positive semidefinite.
MCReport mc_lemma1(const Lemma1Config& cfg, std::uint64_t seed, Exec exec = Exec::parallel);

// ((1 + N) sigma2 / N) (||x2||^2 - ||x1||^2)
double lemma2_gap(double sigma2, int num_targets, const Vector& x1, const Vector& x2);

}  // namespace drnd::lab
