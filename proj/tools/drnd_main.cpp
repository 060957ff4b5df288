// drnd <subcommand> [--config FILE] [--seeds LIST] [--out DIR] [--threads N]
//
// Exit status: 0 all checks passed, 1 a check failed or a seed errored,
// 2 usage or configuration error, 3 I/O or unexpected failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "drnd/commands.hpp"
#include "drnd/error.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFailure = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw drnd::ConfigError("cannot read config file " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  using namespace drnd::cli;

  CLI::App app{"DRND bonuses: estimator checks, inconsistency experiments and toy agents"};
  app.require_subcommand(1);

  std::string config_path, seeds_text, out_dir;
  int threads = 0;
  bool serial = false;
  for (const char* name : {"verify-lemmas", "inconsistency", "heatmap", "train-online", "train-offline"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--seeds", seeds_text, "seed list, e.g. 0-19 or 1,4,7");
    sub->add_option("--out", out_dir, "output directory (default $DRND_OUT_ROOT/<subcommand> or out/<subcommand>)");
    sub->add_option("--threads", threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--serial", serial, "run the serial reference path");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    const Subcommand sub = subcommand_from_string(app.get_subcommands().front()->get_name());
    const RunConfig cfg = parse_config(config_path.empty() ? std::string() : read_file(config_path), sub);

    RunOptions opt;
    if (!seeds_text.empty()) opt.seeds = parse_seed_list(seeds_text);
    if (out_dir.empty()) {
      const char* root = std::getenv("DRND_OUT_ROOT");
      out_dir = (std::filesystem::path(root && *root ? root : "out") / to_string(sub)).string();
    }
    opt.out_dir = out_dir;
    opt.exec = serial ? drnd::Exec::serial : drnd::Exec::parallel;
    drnd::set_threads(threads);

    const RunManifest m = run(cfg, opt);
    for (const auto& c : m.checks) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    }
    for (const auto& e : m.seed_errors) std::cout << "ERROR seed " << e.seed << ": " << e.message << "\n";
    std::cout << "wrote " << m.files.size() << " files and " << kManifestFile << " to " << opt.out_dir.string()
              << "\n";
    return m.pass() ? kExitPass : kExitCheckFailed;
  } catch (const drnd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const drnd::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
