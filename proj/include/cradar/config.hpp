#pragma once

// Experiment configuration: one YAML document per experiment, scale presets
// (desk / full), dotted `key value` overrides, and a JSON rendering of the
// fully resolved configuration (JSON is valid YAML, so it loads back as-is).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cradar/agents.hpp"
#include "cradar/radar_dsp.hpp"
#include "cradar/spectrum_env.hpp"

namespace cradar::harness {

enum class Scale { Desk, Full };

std::string_view to_string(Scale scale);
Scale parse_scale(std::string_view name);

/// An interference source plus the file it came from (trace sources only).
struct SourceSpec {
  env::InterferenceSource source;
  std::filesystem::path trace_path;
};

struct DetectionSettings {
  bool enabled = true;
  std::size_t n_cpis = 100;
  /// Theoretical pfa sweep, ascending.
  std::vector<double> pfas;
  /// FA rates at which PD is reported.
  std::vector<double> matched_fa = {1e-4, 1e-3};
  std::size_t n_train = 4;
  std::size_t n_guard = 3;
  /// Also score a fixed full-band waveform with no interference on the same noise.
  bool no_rfi_baseline = false;
};

struct ExperimentConfig {
  Scale scale = Scale::Desk;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  env::EnvConfig env;
  agents::AgentConfig agent;
  dsp::RadarConfig radar;
  /// Target and noise; the interference schedule comes from the evaluated stream.
  dsp::Scene scene;
  /// Interference-to-noise ratio of each occupied sub-band, dB.
  double inr_db = 20.0;
  SourceSpec interference_train;
  SourceSpec interference_eval;
  DetectionSettings detection;
  std::size_t sharing_window = 101;

  void validate() const;
  /// Scene with per-band interference power set from inr_db.
  dsp::Scene detection_scene() const;
};

/// Defaults for a scale: the synthetic TDD scenario with a duty-cycle shift
/// between training (on 2 / off 3) and evaluation (on 3 / off 2).
ExperimentConfig default_config(Scale scale);

using Override = std::pair<std::string, std::string>;

/// Reads `path` (if non-empty), applies dotted overrides, resolves scale
/// defaults and validates. Unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<Override>& overrides = {});
ExperimentConfig parse_config(const std::string& yaml_text, const std::vector<Override>& overrides = {},
                              const std::filesystem::path& base_dir = {});

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

}  // namespace cradar::harness
