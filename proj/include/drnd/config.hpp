#pragma once

// Run configuration for the drnd command line tool.
//
// Config files are key = value lines grouped under [section] headers.
// '#' starts a comment. Lines before the first header belong to the
// subcommand's own section. Each subcommand accepts exactly one section:
//
//   verify-lemmas  [lemmas]
//   inconsistency  [inconsistency]
//   heatmap        [heatmap]
//   train-online   [online]
//   train-offline  [offline]
//
// Unknown keys, duplicate keys, bad values and constraint violations raise
// ConfigError with the key path ("online.alpha") in the message.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drnd/harness.hpp"
#include "drnd/offline.hpp"
#include "drnd/online.hpp"

namespace drnd::cli {

enum class Subcommand { verify_lemmas, inconsistency, heatmap, train_online, train_offline };

std::string to_string(Subcommand s);
// Throws UsageError on an unknown name.
Subcommand subcommand_from_string(const std::string& name);
std::string section_name(Subcommand s);

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

// Splits text into entries. default_section applies before any header.
std::vector<ConfigEntry> parse_ini(std::string_view text, const std::string& default_section);

struct LemmaSuiteConfig {
  std::uint64_t unbiased_trials = 1'000'000;
  std::vector<int> unbiased_n{1, 2, 5, 10, 100};
  std::uint64_t variance_trials = 1'000'000;
  std::vector<int> variance_n{1, 2, 3};
  std::uint64_t lemma1_trials = 1'000'000;
  double z = 3.0;
  double ratio_tolerance = 0.02;

  void validate() const;
};

struct HeatmapConfig {
  int resolution = 32;
  int dataset_size = 2000;
  std::vector<harness::MixtureComponent> mixture{{0.3, 0.3, 0.08, 1.0}, {0.7, 0.65, 0.1, 1.0}};
  int num_targets = 10;
  double alpha = 0.9;
  int hidden = 16;
  int output_dim = 16;
  InitScheme init = InitScheme::fan_in_uniform;
  int epochs = 2000;
  double lr = 1e-3;
  std::vector<int> spread_targets{2, 32};

  void validate() const;
  DrndConfig drnd_config(int targets, double a) const;
};

struct OnlineRunConfig {
  online::PpoConfig ppo;
  bool compare_baseline = true;
  int min_solved = 4;

  void validate() const;
};

struct OfflineRunConfig {
  offline::LineWalkSpec env;
  offline::BehaviorSpec behavior;
  std::size_t dataset_size = 10'000;
  std::uint64_t dataset_seed = 0;
  offline::SacConfig sac;
  bool run_ablation = true;
  double max_in_support_ratio = 1.5;
  double min_ablation_ratio = 3.0;

  void validate() const;
};

struct RunConfig {
  Subcommand subcommand = Subcommand::verify_lemmas;
  LemmaSuiteConfig lemmas;
  harness::InconsistencyConfig inconsistency;
  HeatmapConfig heatmap;
  OnlineRunConfig online;
  OfflineRunConfig offline;

  // Every setting of the subcommand's section as (key path, value text),
  // in schema order, after defaults and overrides are applied.
  std::vector<std::pair<std::string, std::string>> resolved() const;
};

RunConfig parse_config(std::string_view text, Subcommand subcommand);

// Default seed list per subcommand when none is given on the command line.
std::vector<std::uint64_t> default_seeds(Subcommand s);

// "0,1,2", "0-19" and mixtures such as "0-3,7". Throws UsageError.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Value parsers shared with the CLI. Throw ConfigError naming `what`.
long long parse_int(std::string_view text, const std::string& what);
double parse_double(std::string_view text, const std::string& what);
bool parse_bool(std::string_view text, const std::string& what);
std::vector<int> parse_int_list(std::string_view text, const std::string& what);
// "cx:cy:stddev:weight; ..."
std::vector<harness::MixtureComponent> parse_mixture(std::string_view text, const std::string& what);

}  // namespace drnd::cli
