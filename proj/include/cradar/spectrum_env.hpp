#pragma once

// Finite-MDP model of the shared spectrum: interference sources, sensing
// against a power threshold, history-based state encoding, contiguous
// transmit actions and the collision/bandwidth/adaptation reward.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cradar::env {

using StateIndex = std::uint64_t;

struct EnvConfig {
  std::size_t n_subbands = 5;
  std::size_t history_depth = 2;
  double total_bandwidth = 100e6;
  // Threshold in dB relative to the noise floor.
  double sense_threshold_p0 = 10.0;
  // Standard deviation (dB) of per-band Gaussian power jitter; 0 = noiseless sensing.
  double sense_jitter_db = 0.0;
  double collision_penalty = -45.0;
  double bandwidth_reward_unit = 10.0;
  double adaptation_penalty = -20.0;
  std::size_t adaptation_limit = 20;
  std::size_t cpi_pulses = 1000;

  void validate() const;
};

/// Per-sub-band interference flags, 0 = open, 1 = occupied.
struct OccupancyVector {
  std::vector<std::uint8_t> bits;

  OccupancyVector() = default;
  explicit OccupancyVector(std::size_t n) : bits(n, 0) {}
  OccupancyVector(std::initializer_list<int> values);

  std::size_t size() const { return bits.size(); }
  bool occupied(std::size_t band) const { return bits.at(band) != 0; }
  std::size_t count() const;
  std::string to_string() const;

  friend bool operator==(const OccupancyVector&, const OccupancyVector&) = default;
};

/// The last M occupancy snapshots (oldest first, newest last) and their index.
struct InterferenceState {
  std::vector<OccupancyVector> history;
  StateIndex index = 0;

  const OccupancyVector& latest() const { return history.back(); }
  /// Concatenated history bits as 0/1 reals, oldest snapshot first.
  std::vector<double> features() const;

  friend bool operator==(const InterferenceState&, const InterferenceState&) = default;
};

/// Transmission on the contiguous sub-band interval [lo, hi].
struct RadarAction {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t width() const { return hi - lo + 1; }
  bool covers(std::size_t band) const { return band >= lo && band <= hi; }
  OccupancyVector mask(std::size_t n_subbands) const;
  std::string to_string() const;

  friend bool operator==(const RadarAction&, const RadarAction&) = default;
};

/// Periodic duty cycle on fixed bands: on for `on_steps`, then off for `off_steps`.
struct TddSource {
  std::vector<std::size_t> bands;
  std::size_t on_steps = 1;
  std::size_t off_steps = 1;
  std::size_t phase = 0;
};

/// Fixed bands that are always on (activity = 1), or on with the given
/// per-step probability drawn from a counter-based hash of (seed, t).
struct FddSource {
  std::vector<std::size_t> bands;
  double activity = 1.0;
  std::uint64_t seed = 0;
};

/// Recorded occupancy rows replayed one per step.
struct TraceSource {
  std::vector<OccupancyVector> rows;
  bool wrap = true;
};

using InterferenceSource = std::variant<TddSource, FddSource, TraceSource>;

void validate_source(const InterferenceSource& source, std::size_t n_subbands);

struct RewardBreakdown {
  std::size_t n_collisions = 0;
  std::size_t n_subbands_used = 0;
  std::size_t n_adaptations_in_cpi = 0;
  double r_plus = 0.0;
  double r_star = 0.0;
  double total = 0.0;
};

struct Transition {
  InterferenceState state;
  RadarAction action;
  double reward = 0.0;
  InterferenceState next_state;
};

// -- pure operations -------------------------------------------------------

/// All contiguous intervals sorted by (lo, hi); N(N+1)/2 of them.
std::vector<RadarAction> enumerate_actions(std::size_t n_subbands);
/// Position of `action` in enumerate_actions(n_subbands).
std::size_t action_index(const RadarAction& action, std::size_t n_subbands);
std::size_t count_actions(std::size_t n_subbands);
/// 2^(M*N); throws InvalidConfig when it does not fit in StateIndex.
StateIndex count_states(std::size_t n_subbands, std::size_t history_depth);

/// Thresholds per-band power (dB): bit i is set iff powers_db[i] >= p0.
OccupancyVector sense(std::span<const double> powers_db, double p0);
/// Power levels a synthetic source presents to the sensor: p0 +/- 10 dB plus optional jitter.
std::vector<double> synthetic_powers(const OccupancyVector& truth, double p0, double jitter_db,
                                     std::mt19937_64& rng);

/// Bit order: the newest snapshot occupies the least-significant N bits, and
/// within a snapshot band N-1 is the least-significant bit.
InterferenceState encode_state(std::span<const OccupancyVector> history, std::size_t n_subbands,
                               std::size_t history_depth);
std::vector<OccupancyVector> decode_state(StateIndex index, std::size_t n_subbands,
                                          std::size_t history_depth);

OccupancyVector advance_interference(const InterferenceSource& source, std::size_t t,
                                     std::size_t n_subbands);

std::size_t count_collisions(const RadarAction& action, const OccupancyVector& occupancy);
RewardBreakdown compute_reward(std::size_t n_collisions, std::size_t n_subbands_used,
                               std::size_t n_adaptations, const EnvConfig& cfg);

/// Plain-text trace: one row per step, N comma-separated 0/1 values, '#' comments.
std::vector<OccupancyVector> parse_trace(const std::string& text);
std::vector<OccupancyVector> load_trace(const std::filesystem::path& path);

// -- stateful environment --------------------------------------------------

struct StepResult {
  Transition transition;
  RewardBreakdown reward;
  /// Occupancy concurrent with the transmission (ground truth, not sensed).
  OccupancyVector occupancy;
};

/// Single-threaded MDP state machine. The agent acts on the history sensed
/// up to step t-1; the reward is scored against the occupancy at step t,
/// which is then sensed and shifted into the history.
class SpectrumEnv {
 public:
  SpectrumEnv(EnvConfig cfg, InterferenceSource source, std::uint64_t seed = 0);

  /// Passive sensing of steps 0..M-1 fills the history; decisions start at t = M.
  void reset();
  /// Starts from an explicit history with the next decision at step `t`.
  void reset(std::vector<OccupancyVector> history, std::size_t t);

  StepResult step(const RadarAction& action);

  const InterferenceState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  const InterferenceSource& source() const { return source_; }
  std::span<const RadarAction> actions() const { return actions_; }
  std::size_t time() const { return t_; }
  std::size_t decisions() const { return decisions_; }
  std::size_t adaptations_in_cpi() const { return adaptations_in_cpi_; }

 private:
  OccupancyVector sensed(const OccupancyVector& truth);

  EnvConfig cfg_;
  InterferenceSource source_;
  std::vector<RadarAction> actions_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  InterferenceState state_;
  std::size_t t_ = 0;
  std::size_t decisions_ = 0;
  std::size_t adaptations_in_cpi_ = 0;
  bool has_previous_ = false;
  RadarAction previous_;
};

}  // namespace cradar::env
