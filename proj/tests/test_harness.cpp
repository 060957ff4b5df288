#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "drnd/error.hpp"
#include "drnd/harness.hpp"
#include "test_util.hpp"

using namespace drnd;
using namespace drnd::harness;

TEST(OneHotDataset, CountsAndSamples) {
  const OneHotDataset d = build_onehot_dataset(100, 3, true);
  ASSERT_EQ(d.counts.size(), 100u);
  EXPECT_EQ(d.total(), 5050u);
  std::vector<int> sorted = d.counts;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i + 1);
  std::vector<int> seen(100, 0);
  for (int s : d.samples) ++seen[s];
  EXPECT_EQ(seen, d.counts);
}

TEST(OneHotDataset, UnpermutedCountIsIndexPlusOne) {
  const OneHotDataset d = build_onehot_dataset(5, 1, false);
  EXPECT_EQ(d.counts, (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_TRUE(d.support().isApprox(Matrix::Identity(5, 5)));
}

TEST(OneHotDataset, SeedChangesPermutation) {
  EXPECT_NE(build_onehot_dataset(50, 1, true).counts, build_onehot_dataset(50, 2, true).counts);
  EXPECT_EQ(build_onehot_dataset(50, 1, true).samples, build_onehot_dataset(50, 1, true).samples);
  EXPECT_THROW(build_onehot_dataset(1, 0), ConfigError);
}

TEST(Distribution, ProportionalWithFloor) {
  const std::vector<double> b{1.0, 3.0, 0.0};
  const auto p = empirical_bonus_distribution(b);
  EXPECT_NEAR(p.probabilities[0], 0.25, 1e-12);
  EXPECT_NEAR(p.probabilities[1], 0.75, 1e-12);
  EXPECT_GT(p.probabilities[2], 0.0);
  const std::vector<double> zeros{0.0, 0.0};
  EXPECT_THROW(empirical_bonus_distribution(zeros), DegenerateError);
  const std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(empirical_bonus_distribution(bad), NumericError);
}

TEST(Kl, HandExample) {
  BonusDistribution p, q;
  p.probabilities = {0.5, 0.5};
  q.probabilities = {0.9, 0.1};
  p.labels = q.labels = {"a", "b"};
  // 0.5 ln(0.5/0.9) + 0.5 ln(5)
  EXPECT_NEAR(kl_divergence(p, q), 0.5108256237659907, 1e-12);
  EXPECT_EQ(kl_divergence(p, p), 0.0);
}

TEST(Kl, MatchesOracleOnRandomDistributions) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(30));
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.uniform();
      b[i] = 0.01 + rng.uniform();
    }
    const auto p = empirical_bonus_distribution(a);
    const auto q = empirical_bonus_distribution(b);
    EXPECT_NEAR(kl_divergence(p, q), oracle::kl(p.probabilities, q.probabilities), 1e-12);
    EXPECT_GE(kl_divergence(p, q), 0.0);
  }
}

TEST(Kl, ShapeAndSupportErrors) {
  const auto u3 = uniform_distribution(3), u4 = uniform_distribution(4);
  EXPECT_THROW(kl_divergence(u3, u4), ShapeError);
  BonusDistribution q = u3;
  q.probabilities[1] = 0.0;
  EXPECT_THROW(kl_divergence(u3, q), DegenerateError);
}

TEST(Kl, UniformAgainstInverseSqrtCounts) {
  std::vector<int> counts(100);
  std::iota(counts.begin(), counts.end(), 1);
  const auto q = reference_invsqrt_distribution(counts);
  oracle::Vec qq, uu(100, 0.01);
  double z = 0.0;
  for (int c : counts) z += 1.0 / std::sqrt(c);
  for (int c : counts) qq.push_back(1.0 / std::sqrt(c) / z);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(q.probabilities[i], qq[i], 1e-14);
  EXPECT_NEAR(kl_divergence(uniform_distribution(100), q), oracle::kl(uu, qq), 1e-12);
  EXPECT_NEAR(kl_divergence(uniform_distribution(100), q), 0.136, 5e-3);
  const std::vector<int> bad{1, 0};
  EXPECT_THROW(reference_invsqrt_distribution(bad), ConfigError);
}

TEST(Stats, PearsonAndFit) {
  Rng rng(5);
  std::vector<double> x(40), y(40);
  for (int i = 0; i < 40; ++i) {
    x[i] = rng.uniform();
    y[i] = 2.0 * x[i] - 1.0 + 0.1 * rng.normal();
  }
  EXPECT_NEAR(pearson(x, y), oracle::pearson(x, y), 1e-12);
  const LinearFit f = least_squares(x, y);
  EXPECT_NEAR(f.slope, 2.0, 0.2);
  EXPECT_NEAR(f.intercept, -1.0, 0.1);
  EXPECT_NEAR(f.r2, oracle::pearson(x, y) * oracle::pearson(x, y), 1e-10);
}

namespace {

InconsistencyConfig tiny_config() {
  InconsistencyConfig c;
  c.categories = 12;
  c.hidden = 8;
  c.output_dim = 8;
  c.epochs = 150;
  c.lr = 1e-3;
  c.spread_targets = {1, 4};
  c.seeds = {0, 1, 2};
  return c;
}

}  // namespace

TEST(Inconsistency, SeedRunIsDeterministic) {
  const auto a = run_inconsistency_seed(tiny_config(), 5);
  const auto b = run_inconsistency_seed(tiny_config(), 5);
  ASSERT_TRUE(a.ok) << a.error;
  for (Method m : kAllMethods) {
    const auto i = static_cast<std::size_t>(m);
    EXPECT_EQ(a.methods[i].before, b.methods[i].before);
    EXPECT_EQ(a.methods[i].after, b.methods[i].after);
  }
  EXPECT_EQ(a.spread_by_targets.size(), 2u);
}

TEST(Inconsistency, SerialAndParallelAreIdentical) {
  const auto s = run_inconsistency_experiment(tiny_config(), Exec::serial);
  const auto p = run_inconsistency_experiment(tiny_config(), Exec::parallel);
  for (Method m : kAllMethods) {
    EXPECT_EQ(s.of(m).kl_before_mean, p.of(m).kl_before_mean);
    EXPECT_EQ(s.of(m).kl_after_mean, p.of(m).kl_after_mean);
    EXPECT_EQ(s.of(m).pearson_median, p.of(m).pearson_median);
  }
  EXPECT_EQ(s.median_spread_by_targets, p.median_spread_by_targets);
}

TEST(Inconsistency, KlMatchesOracleFromBonuses) {
  const auto r = run_inconsistency_seed(tiny_config(), 1);
  ASSERT_TRUE(r.ok);
  const auto& st = r.methods[static_cast<std::size_t>(Method::drnd)];
  double z = 0.0;
  for (double b : st.before) z += std::max(b, kBonusFloor);
  oracle::Vec p, u(st.before.size(), 1.0 / static_cast<double>(st.before.size()));
  for (double b : st.before) p.push_back(std::max(b, kBonusFloor) / z);
  EXPECT_NEAR(st.kl_before, oracle::kl(p, u), 1e-12);
}

TEST(Inconsistency, TrainingMakesBonusTrackCounts) {
  InconsistencyConfig c = tiny_config();
  c.epochs = 1500;
  c.lr = 3e-3;
  const auto r = run_inconsistency_seed(c, 3);
  ASSERT_TRUE(r.ok);
  EXPECT_GT(r.methods[static_cast<std::size_t>(Method::drnd)].pearson_after, 0.5);
}

TEST(Inconsistency, ValidateRejectsEmptySeeds) {
  InconsistencyConfig c = tiny_config();
  c.seeds.clear();
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Grid, PointsInsideUnitSquare) {
  const auto g = make_grid_dataset({{0.5, 0.5, 0.3, 1.0}}, 500, 16, 7);
  ASSERT_EQ(g.points.size(), 500u);
  for (const auto& p : g.points) {
    EXPECT_GE(p[0], 0.0);
    EXPECT_LE(p[0], 1.0);
    EXPECT_GE(p[1], 0.0);
    EXPECT_LE(p[1], 1.0);
  }
  EXPECT_EQ(g.lattice().cols(), 256);
  EXPECT_THROW(make_grid_dataset({}, 10, 16, 1), ConfigError);
}

TEST(Grid, HeatmapCellsAndResolution) {
  auto g = make_grid_dataset({{0.5, 0.5, 0.1, 1.0}}, 50, 8, 1);
  const auto cells = heatmap(g, [](const Matrix& x) { return Vector(x.row(0).transpose()); });
  ASSERT_EQ(cells.size(), 64u);
  for (const auto& c : cells) EXPECT_EQ(c.bonus, c.x);
  g.resolution = 4;
  EXPECT_THROW(heatmap(g, [](const Matrix& x) { return Vector(x.row(0).transpose()); }), ConfigError);
}

TEST(Grid, TrainingRejectsNormalizedModels) {
  DrndConfig c;
  c.normalize_inputs = true;
  Drnd m(c, 1);
  EXPECT_THROW(train_on_points(m, Matrix::Zero(2, 4), 10, 1), UsageError);
}
