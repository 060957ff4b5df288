#include "drnd/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "drnd/error.hpp"
#include "drnd/rng.hpp"
#include "json.hpp"

namespace drnd::cli {

namespace {

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string> header) { row(std::vector<std::string>(header)); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += csv_field(cells[i]);
    }
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

class Emitter {
 public:
  Emitter(std::filesystem::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {}

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
    manifest_.files.push_back({name, sha256_hex(content), content.size()});
  }

 private:
  std::filesystem::path dir_;
  RunManifest& manifest_;
};

void check(RunManifest& m, std::string name, bool passed, std::string detail) {
  m.checks.push_back({std::move(name), passed, std::move(detail)});
}

// Runs body(seed) for every seed, one chunk per seed. A seed that throws
// leaves an empty slot and an entry in manifest.seed_errors.
template <typename R, typename Body>
std::vector<std::optional<R>> per_seed(const std::vector<std::uint64_t>& seeds, Exec exec, RunManifest& m,
                                       Body&& body) {
  auto results = map_chunks<std::pair<std::optional<R>, std::string>>(seeds.size(), exec, [&](std::size_t i) {
    std::pair<std::optional<R>, std::string> r;
    try {
      r.first = body(seeds[i]);
    } catch (const std::exception& e) {
      r.second = e.what();
    }
    return r;
  });
  std::vector<std::optional<R>> out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].first) m.seed_errors.push_back({seeds[i], results[i].second});
    out.push_back(std::move(results[i].first));
  }
  return out;
}

// ---------------------------------------------------------------------------
// verify-lemmas

void run_lemmas(const LemmaSuiteConfig& cfg, const std::vector<std::uint64_t>& seeds, Exec exec, RunManifest& m,
                Emitter& emit) {
  const auto two_point = lab::DiscreteTargetDist::scalar({0.0, 2.0});
  Csv lemmas({"seed", "id", "config", "estimate", "standard_error", "analytic", "trials", "z", "ratio", "pass"});
  Csv disc({"distribution", "n", "moments_route", "printed_polynomial", "rederived_polynomial", "printed_minus_moments",
            "rederived_minus_moments"});

  auto add = [&](std::uint64_t seed, const lab::MCReport& r) {
    lemmas.row({std::to_string(seed), r.id, r.config, num(r.estimate), num(r.standard_error), num(r.analytic_value),
                std::to_string(r.trials), num(r.z), num(r.ratio()), r.pass ? "true" : "false"});
  };

  for (std::uint64_t seed : seeds) {
    try {
      const std::uint64_t master = derive_seed(seed, stream::kMonteCarlo);
      for (int n : cfg.unbiased_n) {
        auto r = lab::mc_unbiasedness(two_point, n, cfg.unbiased_trials, derive_seed(master, 100 + n), exec);
        r = lab::MCReport::make(r.id, r.config, r.estimate, r.standard_error, r.analytic_value, r.trials, cfg.z);
        add(seed, r);
        check(m, "unbiasedness n=" + std::to_string(n) + " seed=" + std::to_string(seed), r.pass,
              "mean " + num(r.estimate) + " vs 1/n " + num(r.analytic_value) + ", se " + num(r.standard_error));
      }
      for (int n : cfg.variance_n) {
        auto r = lab::mc_variance(two_point, n, cfg.variance_trials, derive_seed(master, 200 + n), exec);
        r = lab::MCReport::make(r.id, r.config, r.estimate, r.standard_error, r.analytic_value, r.trials, cfg.z);
        add(seed, r);
        check(m, "variance n=" + std::to_string(n) + " seed=" + std::to_string(seed), r.pass,
              "sample variance " + num(r.estimate) + " vs moment route " + num(r.analytic_value));
      }
      const auto configs = default_lemma1_configs(cfg.lemma1_trials);
      for (std::size_t k = 0; k < configs.size(); ++k) {
        auto r = lab::mc_lemma1(configs[k], derive_seed(master, 300 + k), exec);
        r = lab::MCReport::make(r.id, r.config, r.estimate, r.standard_error, r.analytic_value, r.trials, cfg.z);
        add(seed, r);
        const double ratio = r.ratio();
        check(m, "lemma1 config " + std::to_string(k) + " seed=" + std::to_string(seed),
              std::abs(ratio - 1.0) <= cfg.ratio_tolerance,
              "MC/analytic " + num(ratio) + " (analytic " + num(r.analytic_value) + ")");
      }
    } catch (const std::exception& e) {
      m.seed_errors.push_back({seed, e.what()});
    }
  }

  // Closed-form routes do not depend on the seed.
  const std::vector<std::pair<std::string, lab::DiscreteTargetDist>> dists{
      {"{0,2}", two_point}, {"{0,1,3}", lab::DiscreteTargetDist::scalar({0.0, 1.0, 3.0})}};
  for (const auto& [label, dist] : dists) {
    for (int n : cfg.variance_n) {
      const double mom = lab::variance_of_y(dist, n, lab::VarianceRoute::moments);
      const double printed = lab::variance_of_y(dist, n, lab::VarianceRoute::printed_polynomial);
      const double rederived = lab::variance_of_y(dist, n, lab::VarianceRoute::rederived_polynomial);
      disc.row({label, std::to_string(n), num(mom), num(printed), num(rederived), num(printed - mom),
                num(rederived - mom)});
      check(m, "rederived polynomial matches moments " + label + " n=" + std::to_string(n),
            std::abs(rederived - mom) <= 1e-9 * std::max(1.0, std::abs(mom)),
            "rederived " + num(rederived) + " vs moments " + num(mom));
    }
  }
  emit.write("lemmas.csv", lemmas.text());
  emit.write("discrepancies.csv", disc.text());
}

// ---------------------------------------------------------------------------
// inconsistency

// Published KL means for the 100-category one-hot setup, written next to the
// measured ones for comparison.
struct ReferenceValues {
  double before, after;
};

ReferenceValues reference_values(harness::Method method) {
  switch (method) {
    case harness::Method::rnd: return {0.0377, 0.0946};
    case harness::Method::drnd: return {0.0070, 0.0476};
    case harness::Method::b1: return {0.0070, 0.0703};
    case harness::Method::b2: return {0.0104, 0.0396};
  }
  return {0.0, 0.0};
}

void run_inconsistency(harness::InconsistencyConfig cfg, const std::vector<std::uint64_t>& seeds, Exec exec,
                       RunManifest& m, Emitter& emit) {
  using harness::Method;
  cfg.seeds = seeds;
  const auto report = harness::run_inconsistency_experiment(cfg, exec);

  Csv per_seed({"seed", "method", "kl_before", "kl_after", "pearson_after", "spread_before", "fit_slope",
                "fit_intercept", "fit_r2"});
  Csv bonuses({"seed", "method", "category", "count", "before", "after"});
  for (const auto& s : report.seeds) {
    if (!s.ok) {
      m.seed_errors.push_back({s.seed, s.error});
      continue;
    }
    for (Method method : harness::kAllMethods) {
      const auto& st = s.methods[static_cast<std::size_t>(method)];
      per_seed.row({std::to_string(s.seed), harness::to_string(method), num(st.kl_before), num(st.kl_after),
                    num(st.pearson_after), num(st.spread_before), num(st.fit_after.slope),
                    num(st.fit_after.intercept), num(st.fit_after.r2)});
      for (std::size_t c = 0; c < st.before.size(); ++c) {
        bonuses.row({std::to_string(s.seed), harness::to_string(method), std::to_string(c),
                     std::to_string(s.counts[c]), num(st.before[c]), num(st.after[c])});
      }
    }
  }

  Csv summary({"method", "kl_before_mean", "kl_before_std", "kl_after_mean", "kl_after_std", "pearson_median",
               "reference_kl_before", "reference_kl_after"});
  for (Method method : harness::kAllMethods) {
    const auto& s = report.of(method);
    const auto p = reference_values(method);
    summary.row({harness::to_string(method), num(s.kl_before_mean), num(s.kl_before_std), num(s.kl_after_mean),
                 num(s.kl_after_std), num(s.pearson_median), num(p.before), num(p.after)});
  }

  Csv spread({"num_targets", "median_spread"});
  for (std::size_t k = 0; k < cfg.spread_targets.size() && k < report.median_spread_by_targets.size(); ++k) {
    spread.row({std::to_string(cfg.spread_targets[k]), num(report.median_spread_by_targets[k])});
  }

  emit.write("seeds.csv", per_seed.text());
  emit.write("summary.csv", summary.text());
  emit.write("spread.csv", spread.text());
  emit.write("bonuses.csv", bonuses.text());

  const auto& ms = report.median_spread_by_targets;
  bool monotone = !ms.empty();
  for (std::size_t k = 1; k < ms.size(); ++k) monotone = monotone && ms[k] <= ms[k - 1];
  std::string spreads;
  for (double v : ms) spreads += (spreads.empty() ? "" : " ") + num(v);
  check(m, "initial spread median non-increasing in N", monotone, "medians " + spreads);

  const auto& rnd = report.of(Method::rnd);
  const auto& dr = report.of(Method::drnd);
  const auto& b1 = report.of(Method::b1);
  const auto& b2 = report.of(Method::b2);
  check(m, "DRND more uniform than RND before training", dr.kl_before_mean < rnd.kl_before_mean,
        "KL(P||U) drnd " + num(dr.kl_before_mean) + " rnd " + num(rnd.kl_before_mean));
  check(m, "DRND closer to 1/sqrt(n) than RND after training", dr.kl_after_mean < rnd.kl_after_mean,
        "KL(P||1/sqrt n) drnd " + num(dr.kl_after_mean) + " rnd " + num(rnd.kl_after_mean));
  check(m, "b1 more uniform than b2 before training", b1.kl_before_mean < b2.kl_before_mean,
        "KL(P||U) b1 " + num(b1.kl_before_mean) + " b2 " + num(b2.kl_before_mean));
  check(m, "b2 closer to 1/sqrt(n) than b1 after training", b2.kl_after_mean < b1.kl_after_mean,
        "KL(P||1/sqrt n) b1 " + num(b1.kl_after_mean) + " b2 " + num(b2.kl_after_mean));
  check(m, "DRND Pearson with 1/sqrt(n) above RND", dr.pearson_median > rnd.pearson_median,
        "median pearson drnd " + num(dr.pearson_median) + " rnd " + num(rnd.pearson_median));
}

// ---------------------------------------------------------------------------
// heatmap

struct HeatmapSeed {
  std::vector<std::vector<harness::HeatmapCell>> maps;  // method x stage
  std::vector<double> spread;                            // per spread_targets entry
};

void run_heatmap(const HeatmapConfig& cfg, const std::vector<std::uint64_t>& seeds, Exec exec, RunManifest& m,
                 Emitter& emit) {
  const std::vector<std::pair<std::string, DrndConfig>> models{
      {"rnd", cfg.drnd_config(1, 1.0)}, {"drnd", cfg.drnd_config(cfg.num_targets, cfg.alpha)}};

  auto results = per_seed<HeatmapSeed>(seeds, exec, m, [&](std::uint64_t seed) {
    HeatmapSeed out;
    const auto grid = harness::make_grid_dataset(cfg.mixture, cfg.dataset_size, cfg.resolution,
                                                 derive_seed(seed, stream::kDataset));
    const Matrix points = grid.point_matrix();
    for (const auto& [name, dc] : models) {
      Drnd model(dc, seed);
      auto fn = [&model](const Matrix& x) { return Vector(model.bonus_batch(x, Exec::serial).total); };
      out.maps.push_back(harness::heatmap(grid, fn));
      harness::train_on_points(model, points, cfg.epochs, seed);
      out.maps.push_back(harness::heatmap(grid, fn));
    }
    const Matrix lattice = grid.lattice();
    for (int n : cfg.spread_targets) {
      const Drnd model(cfg.drnd_config(n, 1.0), seed);
      const Vector b1 = model.bonus_batch(lattice, Exec::serial).b1;
      out.spread.push_back(b1.maxCoeff() - b1.minCoeff());
    }
    return out;
  });

  Csv cells({"seed", "method", "stage", "x", "y", "bonus"});
  Csv spread({"seed", "num_targets", "spread"});
  std::vector<std::vector<double>> by_targets(cfg.spread_targets.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!results[i]) continue;
    const auto& r = *results[i];
    for (std::size_t k = 0; k < r.maps.size(); ++k) {
      const std::string& method = models[k / 2].first;
      const char* stage = k % 2 ? "after" : "before";
      for (const auto& c : r.maps[k]) {
        cells.row({std::to_string(seeds[i]), method, stage, num(c.x), num(c.y), num(c.bonus)});
      }
    }
    for (std::size_t k = 0; k < r.spread.size(); ++k) {
      spread.row({std::to_string(seeds[i]), std::to_string(cfg.spread_targets[k]), num(r.spread[k])});
      by_targets[k].push_back(r.spread[k]);
    }
  }
  Csv med({"num_targets", "median_spread"});
  std::vector<double> medians;
  for (std::size_t k = 0; k < by_targets.size(); ++k) {
    medians.push_back(median(by_targets[k]));
    med.row({std::to_string(cfg.spread_targets[k]), num(medians.back())});
  }
  emit.write("heatmap.csv", cells.text());
  emit.write("spread_by_seed.csv", spread.text());
  emit.write("spread.csv", med.text());

  bool ok = !medians.empty() && std::all_of(medians.begin(), medians.end(), [](double v) { return std::isfinite(v); });
  for (std::size_t k = 1; k < medians.size(); ++k) ok = ok && medians[k] <= medians[k - 1];
  std::string text;
  for (double v : medians) text += (text.empty() ? "" : " ") + num(v);
  check(m, "initial spread median non-increasing in N", ok, "medians " + text);
}

// ---------------------------------------------------------------------------
// train-online

void run_online(const OnlineRunConfig& cfg, const std::vector<std::uint64_t>& seeds, Exec exec, RunManifest& m,
                Emitter& emit) {
  std::vector<online::PpoConfig> arms{cfg.ppo};
  if (cfg.compare_baseline && cfg.ppo.method != online::BonusMethod::none) {
    online::PpoConfig base = cfg.ppo;
    base.method = online::BonusMethod::none;
    arms.push_back(base);
  }

  Csv curve({"method", "seed", "iteration", "episodes_total", "episodes", "goals", "mean_return", "intrinsic_mean",
             "intrinsic_std", "policy_loss", "value_loss_ext", "value_loss_int", "distill_loss", "entropy"});
  Csv solve({"method", "seed", "solved", "episodes_to_solve", "episodes_total", "action_digest"});
  std::vector<double> med;
  std::vector<int> solved_count;

  for (const auto& arm : arms) {
    const std::string method = online::to_string(arm.method);
    const auto runs = per_seed<online::TrainingCurve>(
        seeds, exec, m, [&](std::uint64_t seed) { return online::rollout_train(arm, seed); });
    std::vector<double> episodes;
    int solved = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (!runs[i]) continue;
      const auto& c = *runs[i];
      for (const auto& it : c.iterations) {
        curve.row({method, std::to_string(seeds[i]), std::to_string(it.iteration), std::to_string(it.episodes_total),
                   std::to_string(it.episodes), std::to_string(it.goals), num(it.mean_return),
                   num(it.intrinsic_mean), num(it.intrinsic_std), num(it.policy_loss), num(it.value_loss_ext),
                   num(it.value_loss_int), num(it.distill_loss), num(it.entropy)});
      }
      std::ostringstream digest;
      digest << std::hex << std::setw(16) << std::setfill('0') << c.action_digest;
      solve.row({method, std::to_string(seeds[i]), c.episodes_to_solve ? "true" : "false",
                 c.episodes_to_solve ? std::to_string(*c.episodes_to_solve) : "", std::to_string(c.episodes_total),
                 digest.str()});
      if (c.episodes_to_solve) ++solved;
      // Unsolved runs are censored at the episode budget.
      episodes.push_back(c.episodes_to_solve ? *c.episodes_to_solve
                                             : std::max<double>(c.episodes_total, arm.max_episodes));
    }
    med.push_back(median(episodes));
    solved_count.push_back(solved);
  }
  emit.write("curve.csv", curve.text());
  emit.write("solve.csv", solve.text());

  check(m, online::to_string(cfg.ppo.method) + " solves in at least " + std::to_string(cfg.min_solved) + " seeds",
        solved_count[0] >= cfg.min_solved,
        std::to_string(solved_count[0]) + "/" + std::to_string(seeds.size()) + " solved within " +
            std::to_string(cfg.ppo.max_episodes) + " episodes");
  if (arms.size() > 1) {
    check(m, "median episodes-to-solve below the no-bonus baseline", med[0] < med[1],
          online::to_string(cfg.ppo.method) + " " + num(med[0]) + " vs none " + num(med[1]));
  }
}

// ---------------------------------------------------------------------------
// train-offline

void run_offline(const OfflineRunConfig& cfg, const std::vector<std::uint64_t>& seeds, Exec exec, RunManifest& m,
                 Emitter& emit) {
  const auto ds = offline::generate_offline_dataset(cfg.env, cfg.behavior, cfg.dataset_size, cfg.dataset_seed);
  std::ostringstream data;
  offline::write_dataset_csv(data, ds);
  emit.write("dataset.csv", data.str());
  emit.write("dataset_meta.json", offline::dataset_metadata_json(ds) + "\n");

  std::vector<std::pair<std::string, offline::SacConfig>> arms{{"penalized", cfg.sac}};
  if (cfg.run_ablation) {
    offline::SacConfig ablation = cfg.sac;
    ablation.lambda_actor = 0.0;
    ablation.lambda_critic = 0.0;
    arms.emplace_back("ablation", ablation);
  }

  Csv eval({"arm", "seed", "lambda_actor", "lambda_critic", "mean_return", "behavior_return", "policy_bonus_mean",
            "dataset_bonus_mean", "bonus_ratio", "final_temperature", "drnd_fingerprint_before",
            "drnd_fingerprint_after"});
  Csv pre({"arm", "seed", "epoch", "expected_loss"});
  Csv curve({"arm", "seed", "iteration", "mean_return", "policy_bonus"});
  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  std::vector<double> ratio_median;
  bool frozen = true;

  for (const auto& [arm, sac] : arms) {
    const auto runs = per_seed<offline::EvalReport>(
        seeds, exec, m, [&, &sac = sac](std::uint64_t seed) { return offline::train_offline(sac, ds, seed); });
    std::vector<double> ratios;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (!runs[i]) continue;
      const auto& r = *runs[i];
      const std::string seed = std::to_string(seeds[i]);
      eval.row({arm, seed, num(sac.lambda_actor), num(sac.lambda_critic), num(r.mean_return), num(r.behavior_return),
                num(r.policy_bonus_mean), num(r.dataset_bonus_mean), num(r.bonus_ratio()), num(r.final_temperature),
                std::to_string(r.drnd_fingerprint_before), std::to_string(r.drnd_fingerprint_after)});
      for (std::size_t e = 0; e < r.pretrain_loss.size(); ++e) {
        pre.row({arm, seed, std::to_string(e), num(r.pretrain_loss[e])});
      }
      nlohmann::ordered_json jc = nlohmann::ordered_json::array();
      for (const auto& p : r.curve) {
        curve.row({arm, seed, std::to_string(p.iteration), num(p.mean_return), num(p.policy_bonus)});
        jc.push_back({{"iteration", p.iteration}, {"mean_return", p.mean_return}, {"policy_bonus", p.policy_bonus}});
      }
      reports.push_back({{"arm", arm},
                         {"seed", seeds[i]},
                         {"lambda_actor", sac.lambda_actor},
                         {"lambda_critic", sac.lambda_critic},
                         {"mean_return", r.mean_return},
                         {"behavior_return", r.behavior_return},
                         {"policy_bonus_mean", r.policy_bonus_mean},
                         {"dataset_bonus_mean", r.dataset_bonus_mean},
                         {"bonus_ratio", r.bonus_ratio()},
                         {"final_temperature", r.final_temperature},
                         {"pretrain_loss", r.pretrain_loss},
                         {"curve", jc},
                         {"drnd_fingerprint_before", r.drnd_fingerprint_before},
                         {"drnd_fingerprint_after", r.drnd_fingerprint_after}});
      ratios.push_back(r.bonus_ratio());
      frozen = frozen && r.drnd_fingerprint_before == r.drnd_fingerprint_after;
    }
    ratio_median.push_back(median(ratios));
  }
  emit.write("eval.csv", eval.text());
  emit.write("eval.json", reports.dump(2) + "\n");
  emit.write("pretrain_loss.csv", pre.text());
  emit.write("curve.csv", curve.text());

  check(m, "penalized policy bonus within " + num(cfg.max_in_support_ratio) + "x of dataset bonus",
        ratio_median[0] <= cfg.max_in_support_ratio, "median ratio " + num(ratio_median[0]));
  if (arms.size() > 1) {
    check(m, "lambda=0 policy bonus above " + num(cfg.min_ablation_ratio) + "x of dataset bonus",
          ratio_median[1] > cfg.min_ablation_ratio, "median ratio " + num(ratio_median[1]));
  }
  check(m, "DRND parameters unchanged by SAC updates", frozen, frozen ? "fingerprints equal" : "fingerprint changed");
}

}  // namespace

std::vector<lab::Lemma1Config> default_lemma1_configs(std::uint64_t trials) {
  std::vector<lab::Lemma1Config> out;
  lab::Lemma1Config a;
  a.num_targets = 4;
  a.theta_mean = Vector::Zero(2);
  a.theta_cov = Matrix::Identity(2, 2);
  a.x = Vector(2);
  a.x << 1.0, 0.0;
  a.trials = trials;
  out.push_back(a);

  lab::Lemma1Config b;
  b.num_targets = 2;
  b.theta_mean = Vector(2);
  b.theta_mean << 0.5, -0.3;
  b.theta_cov = Matrix(2, 2);
  b.theta_cov << 2.0, 0.0, 0.0, 0.5;
  b.x = Vector(2);
  b.x << 1.0, 1.0;
  b.trials = trials;
  out.push_back(b);

  lab::Lemma1Config c;
  c.num_targets = 8;
  c.theta_mean = Vector::Zero(3);
  c.theta_cov = Matrix(3, 3);
  c.theta_cov << 1.0, 0.5, 0.0, 0.5, 2.0, 0.3, 0.0, 0.3, 1.5;
  c.x = Vector(3);
  c.x << 0.5, -1.0, 2.0;
  c.trials = trials;
  out.push_back(c);
  return out;
}

RunManifest run(const RunConfig& config, const RunOptions& options) {
  RunManifest m;
  m.subcommand = to_string(config.subcommand);
  m.config = config.resolved();
  m.seeds = options.seeds.empty() ? default_seeds(config.subcommand) : options.seeds;
  m.started = utc_timestamp();

  std::error_code ec;
  std::filesystem::create_directories(options.out_dir, ec);
  if (ec) throw IoError("cannot create " + options.out_dir.string() + ": " + ec.message());
  Emitter emit(options.out_dir, m);

  switch (config.subcommand) {
    case Subcommand::verify_lemmas: run_lemmas(config.lemmas, m.seeds, options.exec, m, emit); break;
    case Subcommand::inconsistency: run_inconsistency(config.inconsistency, m.seeds, options.exec, m, emit); break;
    case Subcommand::heatmap: run_heatmap(config.heatmap, m.seeds, options.exec, m, emit); break;
    case Subcommand::train_online: run_online(config.online, m.seeds, options.exec, m, emit); break;
    case Subcommand::train_offline: run_offline(config.offline, m.seeds, options.exec, m, emit); break;
  }

  m.finished = utc_timestamp();
  const std::string manifest = m.to_json();
  std::ofstream out(options.out_dir / kManifestFile, std::ios::binary | std::ios::trunc);
  if (!out || !(out << manifest)) throw IoError("cannot write manifest in " + options.out_dir.string());
  return m;
}

}  // namespace drnd::cli
