#pragma once

// Run manifests: what a CLI run was asked to do, what it wrote and whether
// its checks passed.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace drnd::cli {

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
// Throws IoError when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

// UTC, second resolution: 2026-01-31T12:00:00Z
std::string utc_timestamp();

struct FileRecord {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SeedError {
  std::uint64_t seed = 0;
  std::string message;
};

struct RunManifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::uint64_t> seeds;
  std::string started;
  std::string finished;
  std::vector<FileRecord> files;
  std::vector<CheckResult> checks;
  std::vector<SeedError> seed_errors;

  // All checks passed and no seed failed.
  bool pass() const;
  std::string to_json() const;
};

// Rehashes every listed file under `dir`; returns the paths whose content no
// longer matches.
std::vector<std::string> verify_manifest_files(const RunManifest& m, const std::filesystem::path& dir);

}  // namespace drnd::cli
