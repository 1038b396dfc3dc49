#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dbql/metrics.hpp"
#include "dbql/multiagent.hpp"
#include "dbql/planner.hpp"

namespace dbql {

/// Everything needed to reproduce one batch of trials.
struct ExperimentConfig {
  TrialSpec trial;          ///< grid, gamma, schedules, n_agents, mode
  double epsilon = 0.1;     ///< for the on-trajectory Q-learning baseline
  std::uint32_t trials = 100;
  std::uint64_t master_seed = 1;
  std::filesystem::path output_dir = "out";

  /// Throws ConfigError naming the offending key.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses the JSON config schema. Unknown keys are rejected and omitted
/// optional keys take their defaults. Throws ConfigError.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON (sorted keys, every field present).
std::string to_json(const ExperimentConfig& config);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

/// Short hex digest of the canonical config, shown on charts.
std::string config_digest(const ExperimentConfig& config);

/// Seed of trial `index`; a pure function of (master_seed, index).
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t index);

/// Worker threads for trial execution: $DBQL_WORKERS if set, else the
/// hardware concurrency (at least one).
std::size_t default_workers();

/// Runs config.trials independent trials on `workers` threads and
/// aggregates them. Results do not depend on `workers`.
MetricsSeries run_trials(const ExperimentConfig& config, const OptimalQ& reference, std::size_t workers);

struct ArtifactFile {
  std::string name;    ///< relative to the output directory
  std::string sha256;  ///< hex digest of the file contents
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string config_json;
  std::vector<std::uint64_t> trial_seeds;
  std::string software_version;
  double wall_seconds = 0.0;
  std::vector<ArtifactFile> files;
  std::string s_under_convention;
};

struct BatchResult {
  MetricsSeries metrics;
  RunManifest manifest;
};

/// run_trials plus artifact emission into config.output_dir:
/// config.json, loss.csv, valid_rate.csv, histogram.csv, summary.json,
/// loss.svg, histogram.svg and manifest.json. Throws std::runtime_error
/// with the file path on I/O failure.
BatchResult run_batch(const ExperimentConfig& config, std::size_t workers = default_workers());

struct Table1Row {
  SelectionPolicy policy;
  std::uint32_t n_agents;
  double ratio;  ///< S_under(conflict) / S_under(conflict-free)
};

/// Pairs each conflict-mode batch with the conflict-free batch of the
/// same policy and agent count. The configs of a pair must be identical
/// apart from the conflict mode (ContractViolation otherwise).
struct ModeResult {
  ExperimentConfig config;
  double s_under = 0.0;
};
std::vector<Table1Row> table1_rows(std::span<const ModeResult> conflict, std::span<const ModeResult> conflict_free);

/// Agent counts parsed from "lo..hi:step" or a comma list ("10,50,90").
std::vector<std::uint32_t> parse_agent_range(std::string_view text);

/// Modes parsed from "all" or a comma list of "policy/conflict" labels
/// such as "bandit/free,uniform/allowed".
std::vector<Mode> parse_modes(std::string_view text);

/// Runs every (n_agents, mode) combination of `base` into
/// base.output_dir/<run name>/ and then writes table1.csv,
/// valid_rate_vs_n.csv and the combined charts at the top level.
struct SweepResult {
  std::vector<std::pair<ExperimentConfig, MetricsSeries>> runs;
  std::vector<Table1Row> table1;
};
SweepResult run_sweep(const ExperimentConfig& base, std::span<const std::uint32_t> agents,
                      std::span<const Mode> modes, std::size_t workers = default_workers());

/// Directory name of one sweep cell, e.g. "n010_bandit_free".
std::string run_name(std::uint32_t n_agents, const Mode& mode);

}  // namespace dbql
