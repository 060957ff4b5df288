#include "drnd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drnd/error.hpp"
#include "drnd/rng.hpp"

namespace drnd::harness {

Matrix OneHotDataset::support() const { return Matrix::Identity(categories, categories); }

OneHotDataset build_onehot_dataset(int categories, std::uint64_t seed, bool permute_counts) {
  if (categories < 2) throw ConfigError("one-hot dataset needs M >= 2, got " + std::to_string(categories));
  Rng rng(derive_seed(seed, stream::kDataset));
  OneHotDataset ds;
  ds.categories = categories;
  ds.counts.resize(static_cast<std::size_t>(categories));
  std::iota(ds.counts.begin(), ds.counts.end(), 1);
  if (permute_counts) rng.shuffle(std::span<int>(ds.counts));
  for (int c = 0; c < categories; ++c) {
    for (int k = 0; k < ds.counts[static_cast<std::size_t>(c)]; ++k) ds.samples.push_back(c);
  }
  rng.shuffle(std::span<int>(ds.samples));
  return ds;
}

BonusDistribution empirical_bonus_distribution(std::span<const double> bonuses) {
  BonusDistribution d;
  bool any_positive = false;
  double total = 0.0;
  for (std::size_t i = 0; i < bonuses.size(); ++i) {
    const double b = bonuses[i];
    if (!std::isfinite(b)) throw NumericError("bonus distribution: non-finite bonus at " + std::to_string(i));
    any_positive = any_positive || b > 0.0;
    d.raw.push_back(b);
    d.labels.push_back(std::to_string(i));
    d.probabilities.push_back(std::max(b, kBonusFloor));
    total += d.probabilities.back();
  }
  if (!any_positive) throw DegenerateError("bonus distribution: all bonuses are zero");
  for (double& p : d.probabilities) p /= total;
  return d;
}

BonusDistribution uniform_distribution(int size) {
  if (size < 1) throw ConfigError("uniform distribution needs a non-empty support");
  BonusDistribution d;
  for (int i = 0; i < size; ++i) {
    d.labels.push_back(std::to_string(i));
    d.raw.push_back(1.0);
    d.probabilities.push_back(1.0 / size);
  }
  return d;
}

BonusDistribution reference_invsqrt_distribution(std::span<const int> counts) {
  BonusDistribution d;
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 1) throw ConfigError("1/sqrt(n) reference: count " + std::to_string(i) + " is < 1");
    d.labels.push_back(std::to_string(i));
    d.raw.push_back(1.0 / std::sqrt(static_cast<double>(counts[i])));
    total += d.raw.back();
  }
  for (double r : d.raw) d.probabilities.push_back(r / total);
  return d;
}

double kl_divergence(const BonusDistribution& p, const BonusDistribution& q) {
  if (p.probabilities.size() != q.probabilities.size()) {
    throw ShapeError("kl_divergence: supports differ in size");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
    const double pi = p.probabilities[i];
    const double qi = q.probabilities[i];
    if (!(qi > 0.0)) throw DegenerateError("kl_divergence: reference has a non-positive entry");
    if (pi > 0.0) kl += pi * std::log(pi / qi);
  }
  return kl;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("pearson: need two equal-length series");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("least_squares: need two equal-length series");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  LinearFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  const double r = pearson(x, y);
  fit.r2 = r * r;
  return fit;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::rnd: return "rnd";
    case Method::drnd: return "drnd";
    case Method::b1: return "b1";
    case Method::b2: return "b2";
  }
  return "unknown";
}

void InconsistencyConfig::validate() const {
  if (categories < 2) throw ConfigError("categories must be >= 2");
  if (seeds.size() < 2) throw ConfigError("inconsistency experiment needs at least 2 seeds");
  if (num_targets < 1) throw ConfigError("num_targets must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (hidden < 1 || output_dim < 1) throw ConfigError("hidden/output dims must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  for (int n : spread_targets) {
    if (n < 1) throw ConfigError("spread_targets entries must be >= 1");
  }
}

DrndConfig InconsistencyConfig::drnd_config(int targets, double a) const {
  DrndConfig c;
  c.input_dim = categories;
  c.output_dim = output_dim;
  c.predictor_hidden = {hidden, hidden};
  c.target_hidden = {hidden};
  c.activation = Activation::relu;
  c.init = init;
  c.num_targets = targets;
  c.bonus.alpha = a;
  c.adam.lr = lr;
  c.normalize_inputs = false;
  return c;
}

namespace {

// Per-category mean of the drawn target outputs, out x M.
Matrix draw_category_means(const Drnd& model, const OneHotDataset& ds, Rng& rng) {
  const auto& ens = model.ensemble();
  const Matrix support = ds.support();
  std::vector<Matrix> outputs;
  for (int i = 0; i < ens.size(); ++i) outputs.push_back(ens.output_batch(i, support));
  Matrix sums = Matrix::Zero(ens.output_dim(), ds.categories);
  for (int c : ds.samples) sums.col(c) += outputs[static_cast<std::size_t>(ens.sample_index(rng))].col(c);
  for (int c = 0; c < ds.categories; ++c) sums.col(c) /= ds.counts[static_cast<std::size_t>(c)];
  return sums;
}

double train_onehot(Drnd& model, const OneHotDataset& ds, const InconsistencyConfig& cfg, Rng& rng) {
  const Matrix support = ds.support();
  Vector weights(ds.categories);
  for (int c = 0; c < ds.categories; ++c) weights(c) = ds.counts[static_cast<std::size_t>(c)];
  Matrix means = draw_category_means(model, ds, rng);
  double loss = 0.0;
  for (int e = 0; e < cfg.epochs; ++e) {
    if (cfg.resample_targets_each_epoch && e > 0) means = draw_category_means(model, ds, rng);
    loss = distill_step_weighted(model.predictor(), support, means, weights);
  }
  return loss;
}

void fill_after(MethodStats& s, const std::vector<double>& after, const std::vector<double>& inv_sqrt,
                const BonusDistribution& reference) {
  s.after = after;
  s.kl_after = kl_divergence(empirical_bonus_distribution(after), reference);
  s.pearson_after = pearson(inv_sqrt, after);
  s.fit_after = least_squares(inv_sqrt, after);
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

SeedResult run_inconsistency_seed(const InconsistencyConfig& cfg, std::uint64_t seed) {
  SeedResult r;
  r.seed = seed;
  try {
    const OneHotDataset ds = build_onehot_dataset(cfg.categories, seed, cfg.permute_counts);
    r.counts = ds.counts;
    const Matrix support = ds.support();
    const BonusDistribution uniform = uniform_distribution(cfg.categories);
    const BonusDistribution reference = reference_invsqrt_distribution(ds.counts);
    std::vector<double> inv_sqrt;
    for (int n : ds.counts) inv_sqrt.push_back(1.0 / std::sqrt(static_cast<double>(n)));

    // Both models share the predictor initialization and target 0.
    Drnd rnd(cfg.drnd_config(1, 1.0), seed);
    Drnd drnd_model(cfg.drnd_config(cfg.num_targets, cfg.alpha), seed);

    auto record_before = [&](Method m, const Vector& bonus) {
      auto& s = r.methods[static_cast<std::size_t>(m)];
      s.before = to_std(bonus);
      s.kl_before = kl_divergence(empirical_bonus_distribution(s.before), uniform);
      s.spread_before = spread(s.before);
    };
    {
      const BonusBatch rb = rnd.bonus_batch(support, Exec::serial);
      const BonusBatch db = drnd_model.bonus_batch(support, Exec::serial);
      record_before(Method::rnd, rb.total);
      record_before(Method::drnd, db.total);
      record_before(Method::b1, db.b1);
      record_before(Method::b2, db.b2);
    }

    for (int n : cfg.spread_targets) {
      const Drnd probe(cfg.drnd_config(n, cfg.alpha), seed);
      r.spread_by_targets.push_back(spread(to_std(probe.bonus_batch(support, Exec::serial).b1)));
    }

    Rng draws_rnd(derive_seed(seed, stream::kTargetDraws));
    Rng draws_drnd(derive_seed(seed, stream::kTargetDraws));
    r.final_loss_rnd = train_onehot(rnd, ds, cfg, draws_rnd);
    r.final_loss_drnd = train_onehot(drnd_model, ds, cfg, draws_drnd);

    const BonusBatch ra = rnd.bonus_batch(support, Exec::serial);
    const BonusBatch da = drnd_model.bonus_batch(support, Exec::serial);
    fill_after(r.methods[static_cast<std::size_t>(Method::rnd)], to_std(ra.total), inv_sqrt, reference);
    fill_after(r.methods[static_cast<std::size_t>(Method::drnd)], to_std(da.total), inv_sqrt, reference);
    fill_after(r.methods[static_cast<std::size_t>(Method::b1)], to_std(da.b1), inv_sqrt, reference);
    fill_after(r.methods[static_cast<std::size_t>(Method::b2)], to_std(da.b2), inv_sqrt, reference);
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

InconsistencyReport run_inconsistency_experiment(const InconsistencyConfig& cfg, Exec exec) {
  cfg.validate();
  InconsistencyReport report;
  report.config = cfg;
  report.seeds = map_chunks<SeedResult>(cfg.seeds.size(), exec,
                                        [&](std::size_t i) { return run_inconsistency_seed(cfg, cfg.seeds[i]); });
  for (Method m : kAllMethods) {
    std::vector<double> before, after, corr;
    for (const auto& s : report.seeds) {
      if (!s.ok) continue;
      const auto& st = s.methods[static_cast<std::size_t>(m)];
      before.push_back(st.kl_before);
      after.push_back(st.kl_after);
      corr.push_back(st.pearson_after);
    }
    auto mean_std = [](const std::vector<double>& v) {
      if (v.empty()) return std::pair{0.0, 0.0};
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      return std::pair{mean, std::sqrt(ss / static_cast<double>(v.size()))};
    };
    auto& sum = report.summary[static_cast<std::size_t>(m)];
    std::tie(sum.kl_before_mean, sum.kl_before_std) = mean_std(before);
    std::tie(sum.kl_after_mean, sum.kl_after_std) = mean_std(after);
    sum.pearson_median = median(corr);
  }
  for (std::size_t k = 0; k < cfg.spread_targets.size(); ++k) {
    std::vector<double> v;
    for (const auto& s : report.seeds) {
      if (s.ok) v.push_back(s.spread_by_targets[k]);
    }
    report.median_spread_by_targets.push_back(median(v));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Heatmaps

Matrix GridDataset::point_matrix() const {
  Matrix m(2, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    m(0, static_cast<Eigen::Index>(i)) = points[i][0];
    m(1, static_cast<Eigen::Index>(i)) = points[i][1];
  }
  return m;
}

Matrix GridDataset::lattice() const {
  Matrix m(2, resolution * resolution);
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      m(0, iy * resolution + ix) = (ix + 0.5) / resolution;
      m(1, iy * resolution + ix) = (iy + 0.5) / resolution;
    }
  }
  return m;
}

GridDataset make_grid_dataset(std::vector<MixtureComponent> density, int size, int resolution,
                              std::uint64_t seed) {
  if (density.empty()) throw ConfigError("grid dataset needs at least one mixture component");
  if (size < 1) throw ConfigError("grid dataset size must be >= 1");
  double total_weight = 0.0;
  for (const auto& c : density) {
    if (!(c.weight > 0.0) || c.stddev < 0.0) throw ConfigError("mixture weights must be > 0, stddev >= 0");
    if (c.cx < 0.0 || c.cx > 1.0 || c.cy < 0.0 || c.cy > 1.0) {
      throw ConfigError("mixture centres must lie in the unit square");
    }
    total_weight += c.weight;
  }
  GridDataset g;
  g.density = std::move(density);
  g.resolution = resolution;
  Rng rng(derive_seed(seed, stream::kDataset));
  while (static_cast<int>(g.points.size()) < size) {
    double u = rng.uniform() * total_weight;
    std::size_t k = 0;
    while (k + 1 < g.density.size() && u >= g.density[k].weight) u -= g.density[k++].weight;
    const auto& c = g.density[k];
    const double x = c.cx + c.stddev * rng.normal();
    const double y = c.cy + c.stddev * rng.normal();
    if (x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0) g.points.push_back({x, y});
  }
  return g;
}

std::vector<HeatmapCell> heatmap(const GridDataset& grid, const BonusFn& model) {
  if (grid.resolution < 8) throw ConfigError("heatmap resolution must be >= 8");
  const Matrix lattice = grid.lattice();
  const Vector bonus = model(lattice);
  if (bonus.size() != lattice.cols()) throw ShapeError("heatmap: bonus provider returned wrong length");
  std::vector<HeatmapCell> cells;
  cells.reserve(static_cast<std::size_t>(lattice.cols()));
  for (Eigen::Index k = 0; k < lattice.cols(); ++k) cells.push_back({lattice(0, k), lattice(1, k), bonus(k)});
  return cells;
}

void train_on_points(Drnd& model, const Matrix& points, int epochs, std::uint64_t seed) {
  if (model.config().normalize_inputs) throw UsageError("train_on_points: model must not normalize inputs");
  Rng rng(derive_seed(seed, stream::kTargetDraws));
  const auto& ens = model.ensemble();
  Matrix targets(ens.output_dim(), points.cols());
  for (Eigen::Index k = 0; k < points.cols(); ++k) targets.col(k) = ens.sample_c(points.col(k), rng);
  for (int e = 0; e < epochs; ++e) distill_step(model.predictor(), points, targets);
}

}  // namespace drnd::harness
