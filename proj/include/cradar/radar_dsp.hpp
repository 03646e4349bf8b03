#pragma once

// Signal-level scoring of waveform choices: LFM chirps over contiguous
// sub-bands, point-target echoes with band-limited interference, pulse
// compression, range-Doppler maps, 2D cell-averaging CFAR and PD/FA-rate ROC
// points over many CPIs.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cradar/fft.hpp"
#include "cradar/spectrum_env.hpp"

namespace cradar::dsp {

struct RadarConfig {
  /// Simulated complex bandwidth; the N sub-bands tile [-fs/2, fs/2).
  double sample_rate = 100e6;
  double pri = 409.6e-6;
  std::size_t pulses_per_cpi = 1000;
  double pulse_width = 20.48e-6;
  std::size_t n_subbands = 5;
  /// Fast-time span recorded after each transmission (one range bin per sample).
  double range_window = 40.96e-6;
  /// Hann taper across slow time before the Doppler transform.
  bool doppler_window = false;

  double subband_bandwidth() const { return sample_rate / static_cast<double>(n_subbands); }
  std::size_t pulse_samples() const;
  std::size_t window_samples() const;
  /// Doppler bin spacing 1 / (K * PRI).
  double doppler_resolution() const;
  void validate() const;

  /// 100 Msps, 1000-pulse CPIs.
  static RadarConfig full_scale();
  /// Decimated to 25 Msps with 64-pulse CPIs.
  static RadarConfig desk_scale();
};

/// A single point target plus noise and scheduled per-band interference.
struct Scene {
  double target_delay = 12.31e-6;
  double target_doppler = 0.0;
  double target_amplitude = 1.0;
  /// Complex white Gaussian noise power per sample.
  double noise_power = 1.0;
  /// Per-sub-band interference power per sample (linear); empty means none.
  std::vector<double> interference_power;
  /// Per-pulse occupancy switching each band's interference on; empty means never on.
  std::vector<env::OccupancyVector> schedule;

  void validate(const RadarConfig& cfg) const;
};

/// Pulses x fast-time samples, row-major.
struct PulseMatrix {
  std::size_t pulses = 0;
  std::size_t samples = 0;
  std::vector<cplx> data;

  PulseMatrix() = default;
  PulseMatrix(std::size_t n_pulses, std::size_t n_samples)
      : pulses(n_pulses), samples(n_samples), data(n_pulses * n_samples) {}

  std::span<cplx> row(std::size_t k) { return {data.data() + k * samples, samples}; }
  std::span<const cplx> row(std::size_t k) const { return {data.data() + k * samples, samples}; }
};

/// |.|^2 of the slow-time transform; rows are range bins, columns Doppler bins.
struct RangeDopplerMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> power;

  std::size_t n_cells() const { return rows * cols; }
  double at(std::size_t range, std::size_t doppler) const { return power[range * cols + doppler]; }
};

struct Cell {
  std::size_t range = 0;
  std::size_t doppler = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

struct CfarConfig {
  /// Training cells per side in each dimension.
  std::size_t n_train = 4;
  /// Guard cells per side in each dimension.
  std::size_t n_guard = 3;
  double pfa = 1e-3;

  void validate() const;
};

struct DetectionMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> hits;

  bool at(std::size_t range, std::size_t doppler) const { return hits[range * cols + doppler] != 0; }
  std::size_t count() const;
  std::vector<Cell> cells() const;
};

/// Per-cell CFAR ratio (cell / training mean) and training-cell count, so
/// that several pfa thresholds can be applied to one map cheaply.
struct CfarStatistic {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> ratio;
  std::vector<std::uint32_t> n_train;
};

struct CpiScore {
  std::size_t missed = 0;
  std::size_t false_alarms = 0;

  friend bool operator==(const CpiScore&, const CpiScore&) = default;
};

struct RocPoint {
  double pfa_theoretical = 0.0;
  double pd_rate = 0.0;
  double fa_rate = 0.0;
  std::size_t n_cpis = 0;
  std::vector<std::size_t> md_counts;
  std::vector<std::size_t> fa_counts;
};

// -- waveform and scene synthesis -------------------------------------------

/// Unit-amplitude LFM sweeping the action's band [lo*B_sub, (hi+1)*B_sub],
/// placed within [-fs/2, fs/2), lasting pulse_width.
std::vector<cplx> lfm_chirp(const env::RadarAction& action, const RadarConfig& cfg);
double action_bandwidth(const env::RadarAction& action, const RadarConfig& cfg);

/// `pulse` delayed by a (possibly fractional) number of samples via a
/// frequency-domain phase ramp, truncated or zero-extended to `length`.
std::vector<cplx> delayed_echo(std::span<const cplx> pulse, double delay_samples, std::size_t length);

/// Complex Gaussian noise confined to the occupied sub-bands, with
/// `band_power[b]` per sample contributed by each occupied band b.
std::vector<cplx> band_limited_noise(std::span<const double> band_power, const env::OccupancyVector& occupancy,
                                     const RadarConfig& cfg, std::size_t length, std::uint64_t seed);

/// One row per pulse: target echo of that pulse's chirp rotated by
/// exp(j 2 pi f_d k PRI), plus scheduled interference and white noise.
/// Deterministic in (inputs, seed).
PulseMatrix synthesize_cpi(std::span<const env::RadarAction> actions, const Scene& scene, const RadarConfig& cfg,
                           std::uint64_t seed);

// -- processing ---------------------------------------------------------------

/// y[k] = sum_n rx[n + k] * conj(ref[n]), k = 0..rx.size()-1: a target at
/// delay d samples peaks at k = d.
std::vector<cplx> matched_filter(std::span<const cplx> rx, std::span<const cplx> reference);

/// Matched-filters every row against the chirp that pulse transmitted.
PulseMatrix pulse_compress(const PulseMatrix& rx, std::span<const env::RadarAction> actions,
                           const RadarConfig& cfg);

/// Slow-time DFT per range bin (optional Hann taper), magnitude squared.
RangeDopplerMap range_doppler(const PulseMatrix& compressed, bool hann_window = false);

RangeDopplerMap process_cpi(const PulseMatrix& rx, std::span<const env::RadarAction> actions,
                            const RadarConfig& cfg);

/// Range/Doppler cell holding the scene's target.
Cell truth_cell(const Scene& scene, const RadarConfig& cfg);

// -- detection -------------------------------------------------------------

/// alpha = n (pfa^(-1/n) - 1) for square-law cells in exponential noise.
double cfar_threshold_factor(double pfa, std::size_t n_train_total);

/// Training region: the (2(g+t)+1)^2 box minus the (2g+1)^2 guard box,
/// truncated at the map edges with the cell count recomputed per cell.
CfarStatistic cfar_statistic(const RangeDopplerMap& map, const CfarConfig& cfg);
DetectionMask threshold(const CfarStatistic& stat, double pfa);
DetectionMask ca_cfar(const RangeDopplerMap& map, const CfarConfig& cfg);

/// missed = 0 iff some detection lies within +/-1 bin of truth (Doppler wraps);
/// false_alarms counts detections outside that window.
CpiScore score_cpi(const DetectionMask& detections, const Cell& truth);

/// scores[p][j] is CPI j's score at pfas[p]; n_cells is the map size N_p.
std::vector<RocPoint> roc_curve(const std::vector<std::vector<CpiScore>>& scores, std::size_t n_cells,
                                std::span<const double> pfas);

/// PD linearly interpolated in log10(FA) at `fa`; clamps to the end points
/// outside the measured range. Requires points sorted by pfa.
double pd_at_fa(std::span<const RocPoint> roc, double fa);

struct DetectionStudy {
  RadarConfig radar;
  CfarConfig cfar;
  std::vector<double> pfas;
  /// Target, noise and per-band interference power; the schedule is filled per CPI.
  Scene scene;
  std::size_t n_cpis = 100;
  std::uint64_t seed = 0;
};

/// Runs the final n_cpis * K decisions of an action/occupancy stream
/// through synthesis, processing and CFAR. The noise for CPI j depends only
/// on (seed, j), so different action streams see common random draws.
std::vector<RocPoint> run_detection_study(std::span<const env::RadarAction> actions,
                                          std::span<const env::OccupancyVector> occupancy,
                                          const DetectionStudy& study);

// -- measurements ------------------------------------------------------------

/// -3 dB width (seconds) of the compressed pulse's mainlobe, measured on the
/// autocorrelation oversampled by `oversample`.
double compressed_pulse_width(const env::RadarAction& action, const RadarConfig& cfg, std::size_t oversample = 16);

/// Doppler-cut peak over the highest bin outside peak +/- 1, in dB.
double doppler_peak_to_sidelobe_db(const RangeDopplerMap& map, std::size_t range_bin);

// -- export ------------------------------------------------------------------

void write_range_doppler_csv(const RangeDopplerMap& map, const std::filesystem::path& path);
void write_roc_csv(std::span<const RocPoint> roc, const std::filesystem::path& path);
/// Header: magic "CRPM", uint64 pulses, uint64 samples; then interleaved float64 re/im.
void write_pulse_matrix(const PulseMatrix& m, const std::filesystem::path& path);
PulseMatrix read_pulse_matrix(const std::filesystem::path& path);

}  // namespace cradar::dsp
