#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace evavla::acceptance {

struct CriterionResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Options {
  /// Campaign config for the determinism check; a built-in fixture otherwise.
  std::optional<std::filesystem::path> fixture;
  /// Scratch space for campaign outputs.
  std::filesystem::path work_dir;
};

/// Runs every acceptance criterion in order; `on_result` sees each as it ends.
std::vector<CriterionResult> run_all(
    const Options& options,
    const std::function<void(const CriterionResult&)>& on_result = {});

/// The built-in determinism fixture (same content as tests/data/fixture.json).
extern const char* const kFixtureConfig;

}  // namespace evavla::acceptance
