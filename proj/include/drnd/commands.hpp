#pragma once

// The five experiment subcommands. Each writes deterministic CSV/JSON
// artifacts into the output directory and a manifest.json describing them.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "drnd/config.hpp"
#include "drnd/lab.hpp"
#include "drnd/manifest.hpp"
#include "drnd/parallel.hpp"

namespace drnd::cli {

struct RunOptions {
  std::filesystem::path out_dir;
  std::vector<std::uint64_t> seeds;  // empty: default_seeds(subcommand)
  Exec exec = Exec::parallel;
};

// Creates out_dir, runs the subcommand, writes every artifact and then
// manifest.json. Errors raised for one seed are recorded in the manifest and
// the remaining seeds still run. Throws IoError when an artifact cannot be
// written.
RunManifest run(const RunConfig& config, const RunOptions& options);

inline constexpr const char* kManifestFile = "manifest.json";

// Three linear-model settings; the first is Sigma = I, x = [1, 0], N = 4.
std::vector<lab::Lemma1Config> default_lemma1_configs(std::uint64_t trials);

}  // namespace drnd::cli
