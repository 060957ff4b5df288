#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "drnd/drnd.hpp"
#include "drnd/error.hpp"
#include "test_util.hpp"

using namespace drnd;

namespace {

DrndConfig small_config(int n, double alpha, int in = 3, int out = 4) {
  DrndConfig c;
  c.input_dim = in;
  c.output_dim = out;
  c.predictor_hidden = {8, 8};
  c.target_hidden = {8};
  c.num_targets = n;
  c.bonus.alpha = alpha;
  c.adam.lr = 1e-2;
  return c;
}

std::vector<oracle::Vec> target_outputs(const Drnd& m, const Vector& x) {
  std::vector<oracle::Vec> out;
  for (int i = 0; i < m.ensemble().size(); ++i) out.push_back(testutil::to_vec(m.ensemble().output(i, x)));
  return out;
}

}  // namespace

TEST(BonusB2, ScalarSubstitution) {
  // f = 2, mu = 1, B2 = 2: ratio (4 - 1) / (2 - 1) = 3.
  const MomentSet m{Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
  EXPECT_DOUBLE_EQ(bonus_b2(Vector::Constant(1, 2.0), m, {}), std::sqrt(3.0));
}

TEST(BonusB2, PredictionAtMeanIsZero) {
  const MomentSet m{Vector::Constant(2, 1.0), Vector::Constant(2, 3.0)};
  EXPECT_EQ(bonus_b2(Vector::Constant(2, 1.0), m, {}), 0.0);
  // Below the mean the numerator is negative and clamps to zero.
  EXPECT_EQ(bonus_b2(Vector::Constant(2, 0.5), m, {}), 0.0);
}

TEST(BonusB2, RawModeErrors) {
  BonusConfig raw;
  raw.clamp_negative_numerator = false;
  const MomentSet degenerate{Vector::Constant(2, 1.0), Vector::Constant(2, 1.0)};
  EXPECT_THROW(bonus_b2(Vector::Constant(2, 2.0), degenerate, raw), DegenerateError);
  const MomentSet m{Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
  EXPECT_THROW(bonus_b2(Vector::Constant(1, 0.5), m, raw), NumericError);
}

TEST(BonusB2, DegenerateEnsembleIsFlooredWhenClamped) {
  const MomentSet degenerate{Vector::Constant(1, 1.0), Vector::Constant(1, 1.0)};
  const double b = bonus_b2(Vector::Constant(1, 1.0 + 1e-6), degenerate, {});
  EXPECT_TRUE(std::isfinite(b));
}

TEST(BonusB2, UpperClamp) {
  BonusConfig c;
  c.ratio_upper_clamp = 1.0;
  const MomentSet m{Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
  EXPECT_DOUBLE_EQ(bonus_b2(Vector::Constant(1, 2.0), m, c), 1.0);
}

TEST(BonusConfig, RejectsBadAlpha) {
  BonusConfig c;
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.alpha = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Ensemble, MomentsMatchOracle) {
  Rng rng(3);
  const Drnd m(small_config(5, 0.9), 17);
  for (int t = 0; t < 20; ++t) {
    const Vector x = testutil::random_vector(rng, 3);
    const auto targets = target_outputs(m, x);
    const MomentSet mom = m.ensemble().moments(x);
    for (int j = 0; j < 4; ++j) {
      double mu = 0.0, b2 = 0.0;
      for (const auto& v : targets) {
        mu += v[j] / 5.0;
        b2 += v[j] * v[j] / 5.0;
      }
      EXPECT_NEAR(mom.mu(j), mu, 1e-12);
      EXPECT_NEAR(mom.b2(j), b2, 1e-12);
    }
  }
}

TEST(Ensemble, RejectsZeroTargets) {
  DrndConfig c = small_config(0, 0.9);
  EXPECT_THROW(Drnd(c, 1), ConfigError);
}

TEST(Ensemble, RademacherIsPlusMinusOne) {
  DrndConfig c = small_config(2, 0.0);
  c.mode = TargetMode::rademacher;
  const Drnd m(c, 1);
  const Vector x = Vector::Constant(3, 0.3);
  const Vector a = m.ensemble().output(0, x), b = m.ensemble().output(1, x);
  EXPECT_TRUE((a.array() == -1.0).all());
  EXPECT_TRUE((b.array() == 1.0).all());
  c.num_targets = 3;
  EXPECT_THROW(Drnd(c, 1), ConfigError);
}

TEST(Bonus, B1B2MatchOracle) {
  Rng rng(4);
  for (int n : {2, 5, 10}) {
    const Drnd m(small_config(n, 0.9), 100 + static_cast<std::uint64_t>(n));
    for (int t = 0; t < 20; ++t) {
      const Vector x = testutil::random_vector(rng, 3);
      const auto f = testutil::to_vec(mlp_forward(m.predictor().net, x));
      const auto targets = target_outputs(m, x);
      const BonusTerms b = m.bonus(x);
      EXPECT_NEAR(b.b1, oracle::b1(f, targets), 1e-12);
      EXPECT_NEAR(b.b2, oracle::b2(f, targets), 1e-10);
      EXPECT_NEAR(b.total, 0.9 * b.b1 + 0.1 * b.b2, 1e-12);
    }
  }
}

// Properties over random ensembles: both terms are non-negative and the
// total lies between them.
TEST(BonusProperty, TotalIsConvexCombination) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(12));
    const double alpha = rng.uniform();
    const Drnd m(small_config(n, alpha), rng.next());
    const Vector x = testutil::random_vector(rng, 3, 3.0);
    const BonusTerms b = m.bonus(x);
    EXPECT_GE(b.b1, 0.0);
    EXPECT_GE(b.b2, 0.0);
    EXPECT_LE(b.total, std::max(b.b1, b.b2) + 1e-12);
    EXPECT_GE(b.total, std::min(b.b1, b.b2) - 1e-12);
  }
}

TEST(Reduction, RndIsSquaredErrorBitExact) {
  Rng rng(6);
  const Drnd m(small_config(1, 1.0, 5, 8), 9);
  const Matrix x = testutil::random_matrix(rng, 5, 1000, 2.0);
  const BonusBatch b = m.bonus_batch(x, Exec::serial);
  const Matrix f = mlp_forward_batch(m.predictor().net, x);
  const Matrix t = mlp_forward_batch(m.ensemble().targets()[0], x);
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    double err = 0.0;
    for (Eigen::Index j = 0; j < f.rows(); ++j) {
      const double d = f(j, k) - t(j, k);
      err += d * d;
    }
    ASSERT_EQ(b.total(k), err) << "column " << k;
  }
}

TEST(Reduction, CfnIsRootMeanSquareBitExact) {
  Rng rng(7);
  DrndConfig c = small_config(2, 0.0, 5, 8);
  c.mode = TargetMode::rademacher;
  const Drnd m(c, 9);
  const Matrix x = testutil::random_matrix(rng, 5, 1000, 2.0);
  const BonusBatch b = m.bonus_batch(x, Exec::serial);
  const Matrix f = mlp_forward_batch(m.predictor().net, x);
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < f.rows(); ++j) s += f(j, k) * f(j, k);
    ASSERT_EQ(b.total(k), std::sqrt(s / 8.0)) << "column " << k;
  }
}

TEST(BonusBatch, SerialAndParallelAreIdentical) {
  Rng rng(8);
  const Drnd m(small_config(10, 0.9), 2);
  const Matrix x = testutil::random_matrix(rng, 3, 1500);
  const BonusBatch s = m.bonus_batch(x, Exec::serial);
  const BonusBatch p = m.bonus_batch(x, Exec::parallel);
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    ASSERT_EQ(s.b1(k), p.b1(k));
    ASSERT_EQ(s.b2(k), p.b2(k));
    ASSERT_EQ(s.total(k), p.total(k));
  }
}

TEST(BonusBatch, MatchesSingleEvaluation) {
  Rng rng(9);
  const Drnd m(small_config(4, 0.5), 2);
  const Matrix x = testutil::random_matrix(rng, 3, 40);
  const BonusBatch b = m.bonus_batch(x);
  for (Eigen::Index k = 0; k < x.cols(); ++k) EXPECT_NEAR(b.total(k), m.bonus(x.col(k)).total, 1e-12);
}

TEST(InputGradient, MatchesFiniteDifferences) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    DrndConfig c = small_config(1 + static_cast<int>(rng.index(8)), rng.uniform(), 2 + static_cast<int>(rng.index(3)), 3);
    c.activation = Activation::tanh;
    c.normalize_inputs = trial % 2 == 1;
    Drnd m(c, rng.next());
    if (c.normalize_inputs) m.input_normalizer().update(testutil::random_matrix(rng, c.input_dim, 50));
    const Vector x = testutil::random_vector(rng, c.input_dim);
    const Matrix g = m.total_bonus_input_grad(x);
    const auto numeric = oracle::numeric_gradient(
        [&](const oracle::Vec& xi) { return m.bonus(testutil::from_vec(xi)).total; }, testutil::to_vec(x));
    EXPECT_LT(oracle::relative_error(testutil::to_vec(g.col(0)), numeric), 1e-4) << "trial " << trial;
  }
}

TEST(Distill, ExpectedLossIsMeanOverTargets) {
  Rng rng(11);
  const Drnd m(small_config(6, 0.9), 3);
  const Matrix x = testutil::random_matrix(rng, 3, 7);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const auto f = testutil::to_vec(mlp_forward(m.predictor().net, x.col(k)));
    for (const auto& t : target_outputs(m, x.col(k))) {
      for (std::size_t j = 0; j < f.size(); ++j) sum += (f[j] - t[j]) * (f[j] - t[j]) / 6.0;
    }
  }
  EXPECT_NEAR(m.expected_loss(x), sum / 7.0, 1e-12);
}

TEST(Distill, TrainingLowersLossAndKeepsTargetsFrozen) {
  Rng rng(12);
  Drnd m(small_config(4, 0.9), 5);
  const Matrix x = testutil::random_matrix(rng, 3, 64);
  const auto fp = m.ensemble().fingerprint();
  const double before = m.expected_loss(x);
  Rng draws(1);
  for (int i = 0; i < 300; ++i) m.distill(x, draws);
  EXPECT_LT(m.expected_loss(x), 0.5 * before);
  EXPECT_EQ(m.ensemble().fingerprint(), fp);
}

TEST(Distill, EmptyBatchIsUsageError) {
  Drnd m(small_config(2, 0.9), 5);
  Rng r(1);
  EXPECT_THROW(m.distill(Matrix(3, 0), r), UsageError);
}

// A predictor that has seen x n times converges toward the mean of its n
// draws, so b2^2 estimates 1/n. Single inputs are noisy; group means are not.
TEST(Distill, SecondBonusTracksInverseCount) {
  DrndConfig c = small_config(10, 0.0, 12, 16);
  c.adam.lr = 3e-3;
  Drnd m(c, 21);
  const Matrix support = Matrix::Identity(12, 12);
  auto count_of = [](int cat) { return cat < 6 ? 1 : 32; };
  Rng rng(2);
  int total = 0;
  for (int cat = 0; cat < 12; ++cat) total += count_of(cat);
  Matrix inputs(12, total), targets(16, total);
  int col = 0;
  for (int cat = 0; cat < 12; ++cat) {
    for (int r = 0; r < count_of(cat); ++r, ++col) {
      inputs.col(col) = support.col(cat);
      targets.col(col) = m.ensemble().sample_c(support.col(cat), rng);
    }
  }
  for (int i = 0; i < 4000; ++i) distill_step(m.predictor(), inputs, targets);
  const BonusBatch b = m.bonus_batch(support);
  double rare = 0.0, common = 0.0;
  for (int cat = 0; cat < 12; ++cat) (cat < 6 ? rare : common) += b.b2(cat) * b.b2(cat) / 6.0;
  EXPECT_NEAR(rare, 1.0, 0.5);
  EXPECT_LT(common, 0.15);
}

TEST(Normalizer, RunningReturnStd) {
  RunningNormalizer norm(0.5, 1);
  const std::vector<double> r{1.0, 2.0, 0.0, 4.0};
  const auto out = norm.normalize(r);
  // Discounted sums: 1, 2.5, 1.25, 4.625.
  const std::vector<double> g{1.0, 2.5, 1.25, 4.625};
  double mean = 0.0;
  for (double v : g) mean += v / 4.0;
  double var = 0.0;
  for (double v : g) var += (v - mean) * (v - mean) / 4.0;
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(out[i], r[i] / std::sqrt(var), 1e-12);
}

TEST(Normalizer, InputStatsAndClip) {
  InputNormalizer n(2, 1.5);
  Matrix x(2, 4);
  x << 0, 2, 4, 6, 1, 1, 1, 1;
  n.update(x.leftCols(1));
  n.update(x.rightCols(3));
  EXPECT_NEAR(n.mean()(0), 3.0, 1e-12);
  EXPECT_NEAR(n.stddev()(0), std::sqrt(5.0 + 1e-8), 1e-12);
  const Vector z = n.apply(Vector::Constant(2, 100.0));
  EXPECT_EQ(z(0), 1.5);
  EXPECT_EQ(z(1), 1.5);
}

TEST(Checkpoint, RoundTrip) {
  const Drnd m(small_config(3, 0.9), 8);
  std::stringstream s1, s2;
  save_ensemble(s1, m.ensemble());
  save_predictor(s2, m.predictor());
  const TargetEnsemble e = load_ensemble(s1);
  const PredictorState p = load_predictor(s2);
  EXPECT_EQ(e.fingerprint(), m.ensemble().fingerprint());
  EXPECT_EQ(fingerprint(p.net), fingerprint(m.predictor().net));
  const Drnd back(small_config(3, 0.9), e, p);
  const Vector x = Vector::Constant(3, 0.2);
  EXPECT_EQ(back.bonus(x).total, m.bonus(x).total);
}

TEST(Checkpoint, RejectsGarbage) {
  std::stringstream s("not a checkpoint at all");
  EXPECT_THROW(load_mlp(s), Error);
}
