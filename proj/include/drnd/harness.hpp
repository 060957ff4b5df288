#pragma once

// Bonus-inconsistency experiments: how far RND and DRND bonuses are from
// uniform before training, and from 1/sqrt(count) after training, on a
// one-hot dataset where category i occurs i times. Also the 2-D heatmap
// experiment on the unit square.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "drnd/drnd.hpp"
#include "drnd/parallel.hpp"

namespace drnd::harness {

struct OneHotDataset {
  int categories = 0;
  std::vector<int> counts;   // counts[c]: occurrences of category c
  std::vector<int> samples;  // category of every sample, shuffled

  std::size_t total() const { return samples.size(); }
  // M x M identity: column c is the one-hot vector of category c.
  Matrix support() const;
};

// Category c (0-based) occurs c + 1 times; sample order is shuffled with
// `seed`. With permute_counts the count assignment is shuffled as well, so
// that which one-hot index is frequent varies with the seed. Throws
// ConfigError for M < 2.
OneHotDataset build_onehot_dataset(int categories, std::uint64_t seed, bool permute_counts = false);

struct BonusDistribution {
  std::vector<std::string> labels;
  std::vector<double> probabilities;
  std::vector<double> raw;
};

inline constexpr double kBonusFloor = 1e-12;

// p_i = max(b_i, floor) / sum_j max(b_j, floor). Throws DegenerateError when
// no bonus is positive and NumericError on non-finite input.
BonusDistribution empirical_bonus_distribution(std::span<const double> bonuses);
BonusDistribution uniform_distribution(int size);
// q_i proportional to 1/sqrt(n_i). Throws ConfigError on a count < 1.
BonusDistribution reference_invsqrt_distribution(std::span<const int> counts);

// sum_i p_i ln(p_i / q_i) with 0 ln 0 = 0. Throws ShapeError on a support
// mismatch and DegenerateError when q has a non-positive entry.
double kl_divergence(const BonusDistribution& p, const BonusDistribution& q);

double pearson(std::span<const double> x, std::span<const double> y);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

enum class Method { rnd, drnd, b1, b2 };
inline constexpr std::array<Method, 4> kAllMethods{Method::rnd, Method::drnd, Method::b1, Method::b2};
std::string to_string(Method m);

struct InconsistencyConfig {
  int categories = 100;
  std::vector<std::uint64_t> seeds;
  int num_targets = 10;
  double alpha = 0.9;
  int hidden = 16;
  int output_dim = 16;
  InitScheme init = InitScheme::fan_in_uniform;
  // Full-batch Adam steps. 500 steps at 1e-4 leave the bonuses close to
  // uniform, so the defaults train to convergence instead.
  int epochs = 5000;
  double lr = 3e-4;
  std::vector<int> spread_targets{1, 2, 4, 8, 16, 32};
  bool permute_counts = true;
  // false: each sample draws its target once, when the dataset is built.
  // true: every sample draws a fresh target on every epoch.
  bool resample_targets_each_epoch = false;

  void validate() const;
  DrndConfig drnd_config(int num_targets, double alpha) const;
};

struct MethodStats {
  double kl_before = 0.0;   // vs uniform
  double kl_after = 0.0;    // vs 1/sqrt(n)
  double pearson_after = 0.0;
  LinearFit fit_after;      // bonus ~ 1/sqrt(n)
  double spread_before = 0.0;
  std::vector<double> before;
  std::vector<double> after;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<int> counts;
  std::array<MethodStats, 4> methods;  // indexed by Method
  std::vector<double> spread_by_targets;  // first-bonus spread, per spread_targets entry
  double final_loss_rnd = 0.0;
  double final_loss_drnd = 0.0;
};

struct MethodSummary {
  double kl_before_mean = 0.0, kl_before_std = 0.0;
  double kl_after_mean = 0.0, kl_after_std = 0.0;
  double pearson_median = 0.0;
};

struct InconsistencyReport {
  InconsistencyConfig config;
  std::vector<SeedResult> seeds;
  std::array<MethodSummary, 4> summary;
  std::vector<double> median_spread_by_targets;

  const MethodSummary& of(Method m) const { return summary[static_cast<std::size_t>(m)]; }
};

SeedResult run_inconsistency_seed(const InconsistencyConfig& cfg, std::uint64_t seed);

// Seeds are independent; Exec::parallel runs them on an OpenMP team and the
// result is identical to the serial reference.
InconsistencyReport run_inconsistency_experiment(const InconsistencyConfig& cfg,
                                                 Exec exec = Exec::parallel);

// ---------------------------------------------------------------------------
// 2-D heatmaps

struct MixtureComponent {
  double cx = 0.5, cy = 0.5;
  double stddev = 0.1;
  double weight = 1.0;
};

struct GridDataset {
  std::vector<std::array<double, 2>> points;
  std::vector<MixtureComponent> density;
  int resolution = 32;

  Matrix point_matrix() const;   // 2 x P
  Matrix lattice() const;        // 2 x res^2, cell centres, row-major in y
};

// Samples `size` points from the mixture, rejecting draws outside [0,1]^2.
GridDataset make_grid_dataset(std::vector<MixtureComponent> density, int size, int resolution,
                              std::uint64_t seed);

enum class Stage { before, after };

struct HeatmapCell {
  double x = 0.0, y = 0.0, bonus = 0.0;
};

// Bonus provider: bonuses for a 2 x K batch of points.
using BonusFn = std::function<Vector(const Matrix&)>;

// Throws ConfigError when resolution < 8.
std::vector<HeatmapCell> heatmap(const GridDataset& grid, const BonusFn& model);

// Trains the predictor on the dataset points (each point keeps one target
// draw) with full-batch Adam steps. Throws UsageError when the model
// normalizes its inputs.
void train_on_points(Drnd& model, const Matrix& points, int epochs, std::uint64_t seed);

}  // namespace drnd::harness
