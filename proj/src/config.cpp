#include "drnd/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "drnd/error.hpp"

namespace drnd::cli {

std::string to_string(Subcommand s) {
  switch (s) {
    case Subcommand::verify_lemmas: return "verify-lemmas";
    case Subcommand::inconsistency: return "inconsistency";
    case Subcommand::heatmap: return "heatmap";
    case Subcommand::train_online: return "train-online";
    case Subcommand::train_offline: return "train-offline";
  }
  return "unknown";
}

Subcommand subcommand_from_string(const std::string& name) {
  for (Subcommand s : {Subcommand::verify_lemmas, Subcommand::inconsistency, Subcommand::heatmap,
                       Subcommand::train_online, Subcommand::train_offline}) {
    if (to_string(s) == name) return s;
  }
  throw UsageError("unknown subcommand '" + name + "'");
}

std::string section_name(Subcommand s) {
  switch (s) {
    case Subcommand::verify_lemmas: return "lemmas";
    case Subcommand::inconsistency: return "inconsistency";
    case Subcommand::heatmap: return "heatmap";
    case Subcommand::train_online: return "online";
    case Subcommand::train_offline: return "offline";
  }
  return "unknown";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

std::vector<ConfigEntry> parse_ini(std::string_view text, const std::string& default_section) {
  std::vector<ConfigEntry> entries;
  std::set<std::string> seen;
  std::string section = default_section;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    ConfigEntry e{section, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), lineno};
    if (e.key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    const std::string path = e.section + "." + e.key;
    if (!seen.insert(path).second) {
      throw ConfigError("duplicate key " + path + " (line " + std::to_string(lineno) + ")");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

long long parse_int(std::string_view text, const std::string& what) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(what + ": expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

double parse_double(std::string_view text, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v)) {
    throw ConfigError(what + ": expected a finite number, got '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view text, const std::string& what) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(what + ": expected true/false, got '" + std::string(text) + "'");
}

std::vector<int> parse_int_list(std::string_view text, const std::string& what) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    const long long v = parse_int(item, what);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw ConfigError(what + ": value out of range");
    }
    out.push_back(static_cast<int>(v));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<harness::MixtureComponent> parse_mixture(std::string_view text, const std::string& what) {
  std::vector<harness::MixtureComponent> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t semi = text.find(';', pos);
    const auto item = trim(text.substr(pos, semi == std::string_view::npos ? std::string_view::npos : semi - pos));
    pos = semi == std::string_view::npos ? text.size() : semi + 1;
    if (item.empty()) continue;
    std::vector<double> parts;
    std::size_t p = 0;
    while (p <= item.size()) {
      const std::size_t colon = item.find(':', p);
      parts.push_back(parse_double(trim(item.substr(p, colon == std::string_view::npos ? std::string_view::npos : colon - p)), what));
      if (colon == std::string_view::npos) break;
      p = colon + 1;
    }
    if (parts.size() != 4) throw ConfigError(what + ": mixture components are cx:cy:stddev:weight");
    out.push_back({parts[0], parts[1], parts[2], parts[3]});
  }
  if (out.empty()) throw ConfigError(what + ": mixture needs at least one component");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  auto num = [&](std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw UsageError("bad seed list '" + text + "'");
    }
    return v;
  };
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    const auto dash = t.find('-');
    if (dash == std::string_view::npos) {
      seeds.push_back(num(t));
    } else {
      const std::uint64_t lo = num(trim(t.substr(0, dash)));
      const std::uint64_t hi = num(trim(t.substr(dash + 1)));
      if (hi < lo || hi - lo > 100000) throw UsageError("bad seed range '" + std::string(t) + "'");
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  }
  if (seeds.empty()) throw UsageError("empty seed list");
  std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size()) throw UsageError("seed list has duplicates");
  return seeds;
}

std::vector<std::uint64_t> default_seeds(Subcommand s) {
  int n = 1;
  switch (s) {
    case Subcommand::verify_lemmas: n = 1; break;
    case Subcommand::inconsistency: n = 20; break;
    case Subcommand::heatmap: n = 10; break;
    case Subcommand::train_online: n = 5; break;
    case Subcommand::train_offline: n = 3; break;
  }
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint64_t>(i));
  return out;
}

// ---------------------------------------------------------------------------
// Sub-config validation

void LemmaSuiteConfig::validate() const {
  if (unbiased_trials < 10'000 || variance_trials < 10'000 || lemma1_trials < 10'000) {
    throw ConfigError("trial counts must be >= 10000");
  }
  for (int n : unbiased_n) {
    if (n < 1) throw ConfigError("unbiased_n entries must be >= 1");
  }
  for (int n : variance_n) {
    if (n < 1) throw ConfigError("variance_n entries must be >= 1");
  }
  if (!(z > 0.0)) throw ConfigError("z must be > 0");
  if (!(ratio_tolerance > 0.0 && ratio_tolerance < 1.0)) throw ConfigError("ratio_tolerance must lie in (0, 1)");
}

void HeatmapConfig::validate() const {
  if (resolution < 8) throw ConfigError("resolution must be >= 8");
  if (dataset_size < 1) throw ConfigError("dataset_size must be >= 1");
  if (num_targets < 1) throw ConfigError("num_targets must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (hidden < 1 || output_dim < 1) throw ConfigError("hidden and output_dim must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (spread_targets.size() < 2) throw ConfigError("spread_targets needs at least two entries");
  for (int n : spread_targets) {
    if (n < 1) throw ConfigError("spread_targets entries must be >= 1");
  }
}

DrndConfig HeatmapConfig::drnd_config(int targets, double a) const {
  DrndConfig c;
  c.input_dim = 2;
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

void OnlineRunConfig::validate() const {
  ppo.validate();
  if (min_solved < 0) throw ConfigError("min_solved must be >= 0");
}

void OfflineRunConfig::validate() const {
  env.validate();
  behavior.validate();
  sac.validate();
  if (dataset_size < 1000) throw ConfigError("dataset_size must be >= 1000");
  if (!(max_in_support_ratio > 0.0) || !(min_ablation_ratio > 0.0)) {
    throw ConfigError("ratio thresholds must be > 0");
  }
}

// ---------------------------------------------------------------------------
// Schema

namespace {

struct Field {
  std::string key;
  std::function<void(const std::string&, const std::string&)> set;  // (value, key path)
  std::function<std::string()> get;
};

enum class Bound { none, ge0, gt0, unit_closed, unit_open_right, unit_open, ge1, ge2 };

void check_bound(double v, Bound b, const std::string& path) {
  auto fail = [&](const std::string& rule) {
    throw ConfigError(path + " must " + rule + ", got " + format_double(v));
  };
  switch (b) {
    case Bound::none: break;
    case Bound::ge0: if (!(v >= 0.0)) fail("be >= 0"); break;
    case Bound::gt0: if (!(v > 0.0)) fail("be > 0"); break;
    case Bound::unit_closed: if (!(v >= 0.0 && v <= 1.0)) fail("lie in [0, 1]"); break;
    case Bound::unit_open_right: if (!(v >= 0.0 && v < 1.0)) fail("lie in [0, 1)"); break;
    case Bound::unit_open: if (!(v > 0.0 && v < 1.0)) fail("lie in (0, 1)"); break;
    case Bound::ge1: if (!(v >= 1.0)) fail("be >= 1"); break;
    case Bound::ge2: if (!(v >= 2.0)) fail("be >= 2"); break;
  }
}

Field int_field(std::string key, int& ref, Bound b = Bound::none) {
  return {key,
          [&ref, b](const std::string& v, const std::string& path) {
            const long long x = parse_int(v, path);
            check_bound(static_cast<double>(x), b, path);
            if (x > std::numeric_limits<int>::max() || x < std::numeric_limits<int>::min()) {
              throw ConfigError(path + ": value out of range");
            }
            ref = static_cast<int>(x);
          },
          [&ref] { return std::to_string(ref); }};
}

template <class U>
Field uint_field(std::string key, U& ref, Bound b = Bound::none) {
  return {key,
          [&ref, b](const std::string& v, const std::string& path) {
            const long long x = parse_int(v, path);
            if (x < 0) throw ConfigError(path + " must be >= 0, got " + v);
            check_bound(static_cast<double>(x), b, path);
            ref = static_cast<U>(x);
          },
          [&ref] { return std::to_string(ref); }};
}

Field double_field(std::string key, double& ref, Bound b = Bound::none) {
  return {key,
          [&ref, b](const std::string& v, const std::string& path) {
            const double x = parse_double(v, path);
            check_bound(x, b, path);
            ref = x;
          },
          [&ref] { return format_double(ref); }};
}

Field bool_field(std::string key, bool& ref) {
  return {key, [&ref](const std::string& v, const std::string& path) { ref = parse_bool(v, path); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field list_field(std::string key, std::vector<int>& ref) {
  return {key, [&ref](const std::string& v, const std::string& path) { ref = parse_int_list(v, path); },
          [&ref] { return join(ref); }};
}

template <class E, class From, class To>
Field enum_field(std::string key, E& ref, From from, To to) {
  return {key,
          [&ref, from](const std::string& v, const std::string& path) {
            try {
              ref = from(v);
            } catch (const ConfigError& e) {
              throw ConfigError(path + ": " + e.what());
            }
          },
          [&ref, to] { return to(ref); }};
}

std::vector<Field> schema(RunConfig& c) {
  std::vector<Field> f;
  auto init_from = [](const std::string& s) { return init_scheme_from_string(s); };
  auto init_to = [](InitScheme s) { return to_string(s); };
  switch (c.subcommand) {
    case Subcommand::verify_lemmas: {
      auto& l = c.lemmas;
      f.push_back(uint_field("unbiased_trials", l.unbiased_trials));
      f.push_back(list_field("unbiased_n", l.unbiased_n));
      f.push_back(uint_field("variance_trials", l.variance_trials));
      f.push_back(list_field("variance_n", l.variance_n));
      f.push_back(uint_field("lemma1_trials", l.lemma1_trials));
      f.push_back(double_field("z", l.z, Bound::gt0));
      f.push_back(double_field("ratio_tolerance", l.ratio_tolerance, Bound::unit_open));
      break;
    }
    case Subcommand::inconsistency: {
      auto& h = c.inconsistency;
      f.push_back(int_field("categories", h.categories, Bound::ge2));
      f.push_back(int_field("num_targets", h.num_targets, Bound::ge1));
      f.push_back(double_field("alpha", h.alpha, Bound::unit_closed));
      f.push_back(int_field("hidden", h.hidden, Bound::ge1));
      f.push_back(int_field("output_dim", h.output_dim, Bound::ge1));
      f.push_back(enum_field("init", h.init, init_from, init_to));
      f.push_back(int_field("epochs", h.epochs, Bound::ge0));
      f.push_back(double_field("lr", h.lr, Bound::gt0));
      f.push_back(list_field("spread_targets", h.spread_targets));
      f.push_back(bool_field("permute_counts", h.permute_counts));
      f.push_back(bool_field("resample_targets_each_epoch", h.resample_targets_each_epoch));
      break;
    }
    case Subcommand::heatmap: {
      auto& h = c.heatmap;
      f.push_back(int_field("resolution", h.resolution));
      f.push_back(int_field("dataset_size", h.dataset_size, Bound::ge1));
      f.push_back({"mixture",
                   [&h](const std::string& v, const std::string& path) { h.mixture = parse_mixture(v, path); },
                   [&h] {
                     std::string s;
                     for (const auto& m : h.mixture) {
                       if (!s.empty()) s += "; ";
                       s += format_double(m.cx) + ":" + format_double(m.cy) + ":" + format_double(m.stddev) + ":" +
                            format_double(m.weight);
                     }
                     return s;
                   }});
      f.push_back(int_field("num_targets", h.num_targets, Bound::ge1));
      f.push_back(double_field("alpha", h.alpha, Bound::unit_closed));
      f.push_back(int_field("hidden", h.hidden, Bound::ge1));
      f.push_back(int_field("output_dim", h.output_dim, Bound::ge1));
      f.push_back(enum_field("init", h.init, init_from, init_to));
      f.push_back(int_field("epochs", h.epochs, Bound::ge0));
      f.push_back(double_field("lr", h.lr, Bound::gt0));
      f.push_back(list_field("spread_targets", h.spread_targets));
      break;
    }
    case Subcommand::train_online: {
      auto& o = c.online;
      auto& p = o.ppo;
      f.push_back(enum_field("env", p.env.kind, online::env_kind_from_string,
                             [](online::EnvKind k) { return online::to_string(k); }));
      f.push_back(int_field("size", p.env.size, Bound::ge2));
      f.push_back(enum_field("encoding", p.env.encoding, online::obs_encoding_from_string,
                             [](online::ObsEncoding e) { return online::to_string(e); }));
      f.push_back(enum_field("method", p.method, online::bonus_method_from_string,
                             [](online::BonusMethod m) { return online::to_string(m); }));
      f.push_back(int_field("num_envs", p.num_envs, Bound::ge1));
      f.push_back(int_field("rollout_steps", p.rollout_steps, Bound::ge0));
      f.push_back(double_field("gamma", p.gamma, Bound::unit_open_right));
      f.push_back(double_field("gamma_int", p.gamma_int, Bound::unit_open_right));
      f.push_back(double_field("gae_lambda", p.gae_lambda, Bound::unit_closed));
      f.push_back(double_field("clip_eps", p.clip_eps, Bound::unit_open));
      f.push_back(int_field("epochs", p.epochs, Bound::ge1));
      f.push_back(int_field("minibatches", p.minibatches, Bound::ge1));
      f.push_back(double_field("entropy_coef", p.entropy_coef, Bound::ge0));
      f.push_back(double_field("intrinsic_coef", p.intrinsic_coef, Bound::ge0));
      f.push_back(double_field("policy_lr", p.policy_lr, Bound::gt0));
      f.push_back(double_field("critic_lr", p.critic_lr, Bound::gt0));
      f.push_back(int_field("hidden", p.hidden, Bound::ge1));
      f.push_back(int_field("num_targets", p.num_targets, Bound::ge1));
      f.push_back(double_field("alpha", p.alpha, Bound::unit_closed));
      f.push_back(int_field("bonus_output_dim", p.bonus_output_dim, Bound::ge1));
      f.push_back(double_field("drnd_lr", p.drnd_lr, Bound::gt0));
      f.push_back(int_field("distill_epochs", p.distill_epochs, Bound::ge0));
      f.push_back(bool_field("normalize_bonus_inputs", p.normalize_bonus_inputs));
      f.push_back(int_field("max_iterations", p.max_iterations, Bound::ge1));
      f.push_back(int_field("max_episodes", p.max_episodes, Bound::ge1));
      f.push_back(bool_field("stop_when_solved", p.stop_when_solved));
      f.push_back(bool_field("compare_baseline", o.compare_baseline));
      f.push_back(int_field("min_solved", o.min_solved, Bound::ge0));
      break;
    }
    case Subcommand::train_offline: {
      auto& o = c.offline;
      auto& s = o.sac;
      f.push_back(int_field("dim", o.env.dim, Bound::ge1));
      f.push_back(double_field("step", o.env.step, Bound::gt0));
      f.push_back(double_field("target", o.env.target));
      f.push_back(double_field("width", o.env.width, Bound::gt0));
      f.push_back(int_field("horizon", o.env.horizon, Bound::ge1));
      f.push_back(double_field("behavior_low", o.behavior.low));
      f.push_back(double_field("behavior_high", o.behavior.high));
      f.push_back(uint_field("dataset_size", o.dataset_size));
      f.push_back(uint_field("dataset_seed", o.dataset_seed));
      f.push_back(double_field("gamma", s.gamma, Bound::unit_open_right));
      f.push_back(double_field("tau", s.tau, Bound::gt0));
      f.push_back({"target_entropy",
                   [&s](const std::string& v, const std::string& path) {
                     if (v == "auto") {
                       s.target_entropy.reset();
                     } else {
                       s.target_entropy = parse_double(v, path);
                     }
                   },
                   [&s] { return s.target_entropy ? format_double(*s.target_entropy) : std::string("auto"); }});
      f.push_back(double_field("initial_temperature", s.initial_temperature, Bound::gt0));
      f.push_back(double_field("lambda_actor", s.lambda_actor, Bound::ge0));
      f.push_back(double_field("lambda_critic", s.lambda_critic, Bound::ge0));
      f.push_back(double_field("actor_lr", s.actor_lr, Bound::gt0));
      f.push_back(double_field("critic_lr", s.critic_lr, Bound::gt0));
      f.push_back(double_field("temperature_lr", s.temperature_lr, Bound::gt0));
      f.push_back(int_field("batch_size", s.batch_size, Bound::ge1));
      f.push_back(int_field("hidden", s.hidden, Bound::ge1));
      f.push_back(int_field("pretrain_epochs", s.pretrain_epochs, Bound::ge0));
      f.push_back(int_field("num_targets", s.num_targets, Bound::ge1));
      f.push_back(double_field("alpha", s.alpha, Bound::unit_closed));
      f.push_back(int_field("bonus_hidden", s.bonus_hidden, Bound::ge1));
      f.push_back(int_field("bonus_output_dim", s.bonus_output_dim, Bound::ge1));
      f.push_back(double_field("drnd_lr", s.drnd_lr, Bound::gt0));
      f.push_back(bool_field("normalize_bonus_inputs", s.normalize_bonus_inputs));
      f.push_back(int_field("iterations", s.iterations, Bound::ge0));
      f.push_back(int_field("eval_every", s.eval_every, Bound::ge1));
      f.push_back(int_field("eval_episodes", s.eval_episodes, Bound::ge1));
      f.push_back(bool_field("run_ablation", o.run_ablation));
      f.push_back(double_field("max_in_support_ratio", o.max_in_support_ratio, Bound::gt0));
      f.push_back(double_field("min_ablation_ratio", o.min_ablation_ratio, Bound::gt0));
      break;
    }
  }
  return f;
}

void validate_section(const RunConfig& c) {
  switch (c.subcommand) {
    case Subcommand::verify_lemmas: c.lemmas.validate(); break;
    case Subcommand::inconsistency: {
      // Seeds are validated separately; only the structural fields here.
      auto h = c.inconsistency;
      h.seeds = {0, 1};
      h.validate();
      break;
    }
    case Subcommand::heatmap: c.heatmap.validate(); break;
    case Subcommand::train_online: c.online.validate(); break;
    case Subcommand::train_offline: c.offline.validate(); break;
  }
}

}  // namespace

std::vector<std::pair<std::string, std::string>> RunConfig::resolved() const {
  RunConfig copy = *this;
  std::vector<std::pair<std::string, std::string>> out;
  const std::string sec = section_name(subcommand);
  for (const auto& f : schema(copy)) out.emplace_back(sec + "." + f.key, f.get());
  return out;
}

RunConfig parse_config(std::string_view text, Subcommand subcommand) {
  RunConfig c;
  c.subcommand = subcommand;
  const std::string sec = section_name(subcommand);
  const auto entries = parse_ini(text, sec);
  auto fields = schema(c);
  for (const auto& e : entries) {
    const std::string path = e.section + "." + e.key;
    if (e.section != sec) {
      throw ConfigError("section [" + e.section + "] does not apply to " + to_string(subcommand) + " (key " + path +
                        ", line " + std::to_string(e.line) + ")");
    }
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.key == e.key; });
    if (it == fields.end()) {
      throw ConfigError("unknown key " + path + " (line " + std::to_string(e.line) + ")");
    }
    it->set(e.value, path);
  }
  try {
    validate_section(c);
  } catch (const ConfigError& e) {
    throw ConfigError(sec + "." + e.what());
  }
  return c;
}

}  // namespace drnd::cli
