#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evavla/cmaes.hpp"
#include "evavla/oracle.hpp"
#include "evavla/param_space.hpp"
#include "evavla/scene_transforms.hpp"
#include "evavla/trace.hpp"

namespace evavla {

enum class BaselineMode { Clean, Random, Optimized };

std::string_view mode_name(BaselineMode mode) noexcept;

struct EpisodeSpec {
  std::string id;
  std::string instruction;
};

struct OracleConfig {
  enum class Type { Synthetic, External };
  Type type = Type::Synthetic;
  // synthetic
  std::vector<double> worst;
  int steps = 8;
  double sharpness = 0.3;
  // external
  OracleEndpoint endpoint;
  double timeout_s = 120.0;
  std::optional<long> query_budget;
};

struct SceneConfig {
  std::optional<std::filesystem::path> patch_asset;
  IlluminationMode illumination_mode = IlluminationMode::Additive;
};

struct CampaignConfig {
  VariationSpace space;
  OptimizerConfig optimizer;
  OracleConfig oracle;
  std::vector<EpisodeSpec> episodes;
  BaselineMode mode = BaselineMode::Optimized;
  int trials = 10;
  std::filesystem::path output_dir = "evavla_out";
  LengthPolicy length_policy = LengthPolicy::Truncate;
  SceneConfig scene;

  void validate() const;
};

/// Parses and validates a JSON config, applying defaults. Unknown keys are
/// rejected; parse errors carry line and column.
CampaignConfig parse_config(std::string_view text);
CampaignConfig load_config(const std::filesystem::path& path);

/// Name of the environment variable that overrides the oracle endpoint
/// ("stdio:<command...>" or "tcp:<host>:<port>").
inline constexpr const char* kOracleEnvVar = "EVAVLA_ORACLE";
void apply_environment(CampaignConfig& config);

struct EpisodeReport {
  std::string episode;
  double failure_rate = 0.0;
  double mean_normalized_loss = 0.0;
  std::vector<double> best_params;
  double best_loss = 0.0;
  bool best_success = true;
  long trials = 0;
  long queries = 0;

  bool operator==(const EpisodeReport&) const = default;
};

struct CampaignReport {
  std::string kind;
  std::string mode;
  std::vector<EpisodeReport> episodes;
  double fr_mean = 0.0;
  double fr_std = 0.0;  // population std across episodes
  long total_queries = 0;
  // Runtime-only: not recoverable from traces.
  double wall_seconds = 0.0;
  bool complete = true;
  std::string failure;

  /// Field-for-field equality of everything derivable from traces.
  bool same_results(const CampaignReport& other) const;
};

/// Aggregates trace lines into per-(kind, mode) reports, in first-seen order.
std::vector<CampaignReport> build_reports(const std::vector<TraceLine>& lines);

/// Reads trace files and rebuilds their reports.
std::vector<CampaignReport> summarize(const std::vector<std::filesystem::path>& traces);

/// Table of FR per episode plus mean +- std, one row per (kind, mode).
void print_summary_table(const std::vector<CampaignReport>& reports, std::ostream& out);

std::string report_to_json(const CampaignReport& report);

std::unique_ptr<Oracle> make_oracle(const CampaignConfig& config);

/// Runs every episode and writes trace.jsonl, iterations.jsonl and
/// report.json into config.output_dir. Uses `oracle` when given, otherwise
/// builds one from config.oracle. Oracle failures end the campaign with a
/// report flagged incomplete.
CampaignReport run_campaign(const CampaignConfig& config, Oracle* oracle = nullptr);

}  // namespace evavla
