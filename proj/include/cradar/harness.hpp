#pragma once

// Experiment orchestration: offline training on one interference source,
// online evaluation on another, a detection pass driven by the evaluated
// action stream, spectrum-sharing accounting, and CSV/JSON export.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cradar/agents.hpp"
#include "cradar/config.hpp"
#include "cradar/radar_dsp.hpp"

namespace cradar::harness {

struct SharingReport {
  std::size_t window = 0;
  std::size_t n_collisions = 0;
  std::size_t n_missed_opportunities = 0;
  /// Occupied slots the radar stayed out of.
  std::size_t n_avoided = 0;
  /// Open slots the radar transmitted in.
  std::size_t n_used_open = 0;
  std::size_t n_adaptations = 0;
  double pct_waveform_adapt = 0.0;
};

/// Accounting over the final `window` decisions of aligned streams.
SharingReport compute_sharing_report(std::span<const env::RadarAction> actions,
                                     std::span<const env::OccupancyVector> occupancy, std::size_t window);

struct MatchedPd {
  double fa_rate = 0.0;
  double pd = 0.0;
};

struct ExperimentResult {
  agents::Algorithm algorithm = agents::Algorithm::Dqn;
  std::uint64_t seed = 0;
  std::vector<agents::EpochStats> offline;
  std::vector<agents::EpochStats> online;
  agents::DecisionLog log;
  SharingReport sharing;
  std::vector<dsp::RocPoint> roc;
  std::vector<MatchedPd> pd_at_fa;
  /// Fixed full-band waveform, no interference, same noise draws.
  std::vector<dsp::RocPoint> roc_no_rfi;
  std::vector<MatchedPd> pd_at_fa_no_rfi;
  /// Policy iteration only: online decisions taken in states unseen in training.
  std::size_t unvisited_lookups = 0;

  /// Mean of the epoch means over the last quarter of online epochs.
  double final_quartile_reward() const;
  double first_online_reward() const;
};

/// Runs the protocol in memory. Deterministic in the configuration.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes offline_epochs.csv (learning agents), online_epochs.csv, roc.csv,
/// roc_no_rfi.csv (when enabled), sharing.json, summary.json and
/// resolved_config.json into cfg.output_dir.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

void write_epoch_csv(std::span<const agents::EpochStats> stats, const std::filesystem::path& path);

struct ComparisonRow {
  agents::Algorithm algorithm = agents::Algorithm::Dqn;
  std::size_t n_seeds = 0;
  double final_quartile_reward = 0.0;
  /// PD at the first matched FA rate; NaN when detection is disabled.
  double pd_at_fa = 0.0;
  double fa_rate = 0.0;
  double collisions = 0.0;
  double missed_opportunities = 0.0;
  double pct_waveform_adapt = 0.0;
};

/// One row per algorithm (first-seen order), averaged over its seeds.
std::vector<ComparisonRow> summarize(std::span<const ExperimentResult> results);
/// Runs every configuration, then summarizes. Configurations must differ only
/// in algorithm and seed.
std::vector<ComparisonRow> compare_algorithms(std::span<const ExperimentConfig> configs,
                                              std::vector<ExperimentResult>* results = nullptr);
void write_comparison_csv(std::span<const ComparisonRow> rows, const std::filesystem::path& path);

}  // namespace cradar::harness
