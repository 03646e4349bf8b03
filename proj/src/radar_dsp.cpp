#include "cradar/radar_dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "cradar/error.hpp"
#include "cradar/seeding.hpp"
#include "cradar/simd.hpp"

namespace cradar::dsp {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Signed frequency of FFT bin k for an n-point transform at rate fs.
double bin_frequency(std::size_t k, std::size_t n, double fs) {
  const double kk = k < (n + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
  return kk * fs / static_cast<double>(n);
}

void check_action(const env::RadarAction& action, std::size_t n_subbands) {
  if (action.lo > action.hi || action.hi >= n_subbands) {
    throw Error(ErrorKind::InvalidAction, "action " + action.to_string() + " is not a contiguous sub-band interval");
  }
}

std::vector<cplx> spectrum(std::span<const cplx> x, std::size_t nfft) {
  std::vector<cplx> out(nfft);
  std::copy(x.begin(), x.end(), out.begin());
  fft(out);
  return out;
}

/// Correlates against a precomputed reference spectrum (same nfft).
void correlate(std::span<const cplx> rx, std::span<const cplx> ref_spectrum, std::span<cplx> out) {
  const std::size_t nfft = ref_spectrum.size();
  std::vector<cplx> x(nfft);
  std::copy(rx.begin(), rx.end(), x.begin());
  fft(x);
  simd::cmul_conj(x, ref_spectrum, x);
  ifft(x);
  std::copy_n(x.begin(), out.size(), out.begin());
}

std::size_t circular_distance(std::size_t a, std::size_t b, std::size_t n) {
  const std::size_t d = a > b ? a - b : b - a;
  return std::min(d, n - d);
}

template <typename Fn>
void write_file(const std::filesystem::path& path, std::ios::openmode mode, Fn&& fn) {
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  fn(out);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

// -- configuration ------------------------------------------------------------

std::size_t RadarConfig::pulse_samples() const {
  return static_cast<std::size_t>(std::llround(pulse_width * sample_rate));
}

std::size_t RadarConfig::window_samples() const {
  return static_cast<std::size_t>(std::llround(range_window * sample_rate));
}

double RadarConfig::doppler_resolution() const { return 1.0 / (static_cast<double>(pulses_per_cpi) * pri); }

void RadarConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, "radar: " + msg); };
  if (!(sample_rate > 0.0)) fail("sample_rate must be > 0");
  if (!(pri > 0.0)) fail("pri must be > 0");
  if (!(pulse_width > 0.0 && pulse_width < pri)) fail("pulse_width must lie in (0, pri)");
  if (!(range_window >= pulse_width && range_window <= pri)) fail("range_window must lie in [pulse_width, pri]");
  if (pulses_per_cpi < 2) fail("pulses_per_cpi must be >= 2");
  if (n_subbands == 0) fail("n_subbands must be >= 1");
  if (pulse_samples() < 2) fail("pulse_width spans fewer than 2 samples");
}

RadarConfig RadarConfig::full_scale() { return RadarConfig{}; }

RadarConfig RadarConfig::desk_scale() {
  RadarConfig cfg;
  cfg.sample_rate = 25e6;
  cfg.pulses_per_cpi = 64;
  return cfg;
}

void Scene::validate(const RadarConfig& cfg) const {
  if (!(target_delay >= 0.0 && target_delay < cfg.pri)) {
    throw Error(ErrorKind::Range, "target delay must lie in [0, pri)");
  }
  if (target_delay >= cfg.range_window) throw Error(ErrorKind::Range, "target delay beyond the range window");
  if (!(target_amplitude >= 0.0) || !(noise_power >= 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "scene amplitudes and powers must be >= 0");
  }
  if (!interference_power.empty() && interference_power.size() != cfg.n_subbands) {
    throw Error(ErrorKind::Dimension, "interference power needs one entry per sub-band");
  }
  for (double p : interference_power) {
    if (!(p >= 0.0)) throw Error(ErrorKind::InvalidConfig, "interference power must be >= 0");
  }
  for (const auto& occ : schedule) {
    if (occ.size() != cfg.n_subbands) throw Error(ErrorKind::Dimension, "schedule row width != n_subbands");
  }
}

void CfarConfig::validate() const {
  if (n_train < 1) throw Error(ErrorKind::InvalidConfig, "cfar: n_train must be >= 1");
  if (!(pfa > 0.0 && pfa < 1.0)) throw Error(ErrorKind::InvalidConfig, "cfar: pfa must lie in (0, 1)");
}

std::size_t DetectionMask::count() const {
  return static_cast<std::size_t>(std::count(hits.begin(), hits.end(), std::uint8_t{1}));
}

std::vector<Cell> DetectionMask::cells() const {
  std::vector<Cell> out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]) out.push_back(Cell{i / cols, i % cols});
  }
  return out;
}

// -- waveform and scene synthesis -------------------------------------------

double action_bandwidth(const env::RadarAction& action, const RadarConfig& cfg) {
  return static_cast<double>(action.width()) * cfg.subband_bandwidth();
}

std::vector<cplx> lfm_chirp(const env::RadarAction& action, const RadarConfig& cfg) {
  check_action(action, cfg.n_subbands);
  const std::size_t n = cfg.pulse_samples();
  const double fs = cfg.sample_rate;
  const double f0 = -fs / 2.0 + static_cast<double>(action.lo) * cfg.subband_bandwidth();
  const double bw = action_bandwidth(action, cfg);
  const double duration = static_cast<double>(n) / fs;
  const double slope = bw / duration;
  std::vector<cplx> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    s[i] = std::polar(1.0, kTwoPi * (f0 * t + 0.5 * slope * t * t));
  }
  return s;
}

std::vector<cplx> delayed_echo(std::span<const cplx> pulse, double delay_samples, std::size_t length) {
  if (!(delay_samples >= 0.0)) throw Error(ErrorKind::Range, "delay must be >= 0");
  const std::size_t span = pulse.size() + static_cast<std::size_t>(std::ceil(delay_samples));
  const std::size_t nfft = next_pow2(std::max(length, span) + 1);
  auto x = spectrum(pulse, nfft);
  for (std::size_t k = 0; k < nfft; ++k) {
    // Normalized frequency in cycles per sample.
    const double f = bin_frequency(k, nfft, 1.0);
    x[k] *= std::polar(1.0, -kTwoPi * f * delay_samples);
  }
  ifft(x);
  x.resize(length);
  return x;
}

std::vector<cplx> band_limited_noise(std::span<const double> band_power, const env::OccupancyVector& occupancy,
                                     const RadarConfig& cfg, std::size_t length, std::uint64_t seed) {
  if (band_power.size() != cfg.n_subbands || occupancy.size() != cfg.n_subbands) {
    throw Error(ErrorKind::Dimension, "band powers and occupancy need one entry per sub-band");
  }
  std::vector<cplx> x(length);
  if (length == 0) return x;
  const double fs = cfg.sample_rate;
  const double b_sub = cfg.subband_bandwidth();
  std::vector<std::size_t> band_of(length);
  std::vector<std::size_t> bins_in_band(cfg.n_subbands, 0);
  for (std::size_t k = 0; k < length; ++k) {
    const double f = bin_frequency(k, length, fs) + fs / 2.0;
    const auto b = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(f / b_sub))), cfg.n_subbands - 1);
    band_of[k] = b;
    ++bins_in_band[b];
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  bool any = false;
  for (std::size_t k = 0; k < length; ++k) {
    const std::size_t b = band_of[k];
    if (!occupancy.occupied(b) || band_power[b] <= 0.0) continue;
    // IFFT scales by 1/L, so per-bin variance P L^2 / K yields power P in time.
    const double scale = std::sqrt(band_power[b] * static_cast<double>(length) * static_cast<double>(length) /
                                   static_cast<double>(bins_in_band[b]));
    const double re = gauss(rng);
    const double im = gauss(rng);
    x[k] = scale * cplx(re, im);
    any = true;
  }
  if (any) ifft(x);
  return x;
}

PulseMatrix synthesize_cpi(std::span<const env::RadarAction> actions, const Scene& scene, const RadarConfig& cfg,
                           std::uint64_t seed) {
  cfg.validate();
  scene.validate(cfg);
  if (actions.size() != cfg.pulses_per_cpi) {
    throw Error(ErrorKind::Dimension, "need one action per pulse (" + std::to_string(cfg.pulses_per_cpi) + ")");
  }
  if (!scene.schedule.empty() && scene.schedule.size() != actions.size()) {
    throw Error(ErrorKind::Dimension, "interference schedule length != pulses_per_cpi");
  }
  const std::size_t w = cfg.window_samples();
  const double delay = scene.target_delay * cfg.sample_rate;
  PulseMatrix m(actions.size(), w);

  // The echo shape depends only on the action; the Doppler rotation is per pulse.
  std::map<std::size_t, std::vector<cplx>> echoes;
  if (scene.target_amplitude > 0.0) {
    for (const auto& a : actions) {
      const auto idx = env::action_index(a, cfg.n_subbands);
      if (!echoes.count(idx)) echoes.emplace(idx, delayed_echo(lfm_chirp(a, cfg), delay, w));
    }
  }

  std::mt19937_64 noise_rng(derive_seed(seed, 0));
  std::normal_distribution<double> gauss(0.0, std::sqrt(scene.noise_power / 2.0));
  const bool interference = !scene.interference_power.empty() && !scene.schedule.empty();
  for (std::size_t k = 0; k < actions.size(); ++k) {
    auto row = m.row(k);
    if (scene.target_amplitude > 0.0) {
      const auto& echo = echoes.at(env::action_index(actions[k], cfg.n_subbands));
      const cplx rot = std::polar(scene.target_amplitude,
                                  kTwoPi * scene.target_doppler * static_cast<double>(k) * cfg.pri);
      simd::caxpy(rot, echo, row);
    }
    if (interference && scene.schedule[k].count() > 0) {
      const auto rfi = band_limited_noise(scene.interference_power, scene.schedule[k], cfg, w, derive_seed(seed, k + 1));
      simd::caxpy(cplx(1.0, 0.0), rfi, row);
    }
    if (scene.noise_power > 0.0) {
      for (auto& v : row) {
        const double re = gauss(noise_rng);
        const double im = gauss(noise_rng);
        v += cplx(re, im);
      }
    }
  }
  return m;
}

// -- processing ---------------------------------------------------------------

std::vector<cplx> matched_filter(std::span<const cplx> rx, std::span<const cplx> reference) {
  if (reference.empty() || reference.size() > rx.size()) {
    throw Error(ErrorKind::Dimension, "reference must be non-empty and no longer than rx");
  }
  const std::size_t nfft = next_pow2(rx.size() + reference.size() - 1);
  const auto ref = spectrum(reference, nfft);
  std::vector<cplx> y(rx.size());
  correlate(rx, ref, y);
  return y;
}

PulseMatrix pulse_compress(const PulseMatrix& rx, std::span<const env::RadarAction> actions,
                           const RadarConfig& cfg) {
  if (actions.size() != rx.pulses) throw Error(ErrorKind::Dimension, "need one action per pulse");
  const std::size_t p = cfg.pulse_samples();
  if (p > rx.samples) throw Error(ErrorKind::Dimension, "pulse longer than the receive window");
  const std::size_t nfft = next_pow2(rx.samples + p - 1);
  std::map<std::size_t, std::vector<cplx>> refs;
  PulseMatrix out(rx.pulses, rx.samples);
  for (std::size_t k = 0; k < rx.pulses; ++k) {
    const auto idx = env::action_index(actions[k], cfg.n_subbands);
    auto it = refs.find(idx);
    if (it == refs.end()) it = refs.emplace(idx, spectrum(lfm_chirp(actions[k], cfg), nfft)).first;
    correlate(rx.row(k), it->second, out.row(k));
  }
  return out;
}

RangeDopplerMap range_doppler(const PulseMatrix& compressed, bool hann_window) {
  if (compressed.pulses < 2) throw Error(ErrorKind::Dimension, "range-Doppler processing needs >= 2 pulses");
  const std::size_t kk = compressed.pulses;
  std::vector<double> taper(kk, 1.0);
  if (hann_window) {
    for (std::size_t k = 0; k < kk; ++k) {
      taper[k] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(kk)));
    }
  }
  RangeDopplerMap map{compressed.samples, kk, std::vector<double>(compressed.samples * kk)};
  std::vector<cplx> column(kk);
  for (std::size_t r = 0; r < compressed.samples; ++r) {
    for (std::size_t k = 0; k < kk; ++k) column[k] = compressed.data[k * compressed.samples + r] * taper[k];
    fft(column);
    simd::abs2(column, std::span<double>(map.power.data() + r * kk, kk));
  }
  return map;
}

RangeDopplerMap process_cpi(const PulseMatrix& rx, std::span<const env::RadarAction> actions,
                            const RadarConfig& cfg) {
  return range_doppler(pulse_compress(rx, actions, cfg), cfg.doppler_window);
}

Cell truth_cell(const Scene& scene, const RadarConfig& cfg) {
  const auto k = static_cast<long long>(cfg.pulses_per_cpi);
  long long d = std::llround(scene.target_doppler / cfg.doppler_resolution()) % k;
  if (d < 0) d += k;
  return Cell{static_cast<std::size_t>(std::llround(scene.target_delay * cfg.sample_rate)),
              static_cast<std::size_t>(d)};
}

// -- detection -------------------------------------------------------------

double cfar_threshold_factor(double pfa, std::size_t n_train_total) {
  if (!(pfa > 0.0 && pfa < 1.0)) throw Error(ErrorKind::InvalidConfig, "pfa must lie in (0, 1)");
  if (n_train_total == 0) throw Error(ErrorKind::InvalidConfig, "need at least one training cell");
  const double n = static_cast<double>(n_train_total);
  // n (pfa^(-1/n) - 1), written with expm1 to stay accurate as pfa -> 1.
  return n * std::expm1(-std::log(pfa) / n);
}

CfarStatistic cfar_statistic(const RangeDopplerMap& map, const CfarConfig& cfg) {
  cfg.validate();
  const std::size_t g = cfg.n_guard;
  const std::size_t h = cfg.n_guard + cfg.n_train;
  const std::size_t span = 2 * h + 1;
  if (map.rows < span || map.cols < span) {
    throw Error(ErrorKind::InvalidConfig, "CFAR window (" + std::to_string(span) + " cells) exceeds the map (" +
                                              std::to_string(map.rows) + " x " + std::to_string(map.cols) + ")");
  }
  const std::size_t rows = map.rows;
  const std::size_t cols = map.cols;
  // Summed-area table with a zero border: sat[(r+1)(cols+1) + c+1] = sum of map[0..r][0..c].
  const std::size_t stride = cols + 1;
  std::vector<double> sat((rows + 1) * stride, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double run = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      run += map.power[r * cols + c];
      sat[(r + 1) * stride + c + 1] = sat[r * stride + c + 1] + run;
    }
  }
  // Inclusive box [r0, r1] x [c0, c1].
  auto box = [&](std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    return sat[(r1 + 1) * stride + c1 + 1] - sat[r0 * stride + c1 + 1] - sat[(r1 + 1) * stride + c0] +
           sat[r0 * stride + c0];
  };
  auto lo = [](std::size_t i, std::size_t d) { return i >= d ? i - d : 0; };
  auto hi = [](std::size_t i, std::size_t d, std::size_t n) { return std::min(i + d, n - 1); };

  CfarStatistic stat{rows, cols, std::vector<double>(rows * cols), std::vector<std::uint32_t>(rows * cols)};
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t ro0 = lo(r, h), ro1 = hi(r, h, rows);
    const std::size_t rg0 = lo(r, g), rg1 = hi(r, g, rows);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t co0 = lo(c, h), co1 = hi(c, h, cols);
      const std::size_t cg0 = lo(c, g), cg1 = hi(c, g, cols);
      const std::size_t n = (ro1 - ro0 + 1) * (co1 - co0 + 1) - (rg1 - rg0 + 1) * (cg1 - cg0 + 1);
      // Clamp tiny negative round-off from the table differences.
      const double sum = std::max(0.0, box(ro0, ro1, co0, co1) - box(rg0, rg1, cg0, cg1));
      const double cell = map.power[r * cols + c];
      const double mean = sum / static_cast<double>(n);
      double ratio;
      if (mean > 0.0) {
        ratio = cell / mean;
      } else {
        ratio = cell > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      }
      stat.ratio[r * cols + c] = ratio;
      stat.n_train[r * cols + c] = static_cast<std::uint32_t>(n);
    }
  }
  return stat;
}

DetectionMask threshold(const CfarStatistic& stat, double pfa) {
  DetectionMask mask{stat.rows, stat.cols, std::vector<std::uint8_t>(stat.ratio.size(), 0)};
  std::map<std::uint32_t, double> alpha;
  for (std::size_t i = 0; i < stat.ratio.size(); ++i) {
    const auto n = stat.n_train[i];
    auto it = alpha.find(n);
    if (it == alpha.end()) it = alpha.emplace(n, cfar_threshold_factor(pfa, n)).first;
    mask.hits[i] = stat.ratio[i] > it->second ? 1 : 0;
  }
  return mask;
}

DetectionMask ca_cfar(const RangeDopplerMap& map, const CfarConfig& cfg) {
  return threshold(cfar_statistic(map, cfg), cfg.pfa);
}

CpiScore score_cpi(const DetectionMask& detections, const Cell& truth) {
  if (truth.range >= detections.rows || truth.doppler >= detections.cols) {
    throw Error(ErrorKind::Range, "truth cell outside the map");
  }
  CpiScore score{1, 0};
  for (std::size_t i = 0; i < detections.hits.size(); ++i) {
    if (!detections.hits[i]) continue;
    const std::size_t r = i / detections.cols;
    const std::size_t d = i % detections.cols;
    const std::size_t dr = r > truth.range ? r - truth.range : truth.range - r;
    if (dr <= 1 && circular_distance(d, truth.doppler, detections.cols) <= 1) {
      score.missed = 0;
    } else {
      ++score.false_alarms;
    }
  }
  return score;
}

std::vector<RocPoint> roc_curve(const std::vector<std::vector<CpiScore>>& scores, std::size_t n_cells,
                                std::span<const double> pfas) {
  if (scores.size() != pfas.size()) throw Error(ErrorKind::Dimension, "one score list per pfa is required");
  if (n_cells == 0) throw Error(ErrorKind::InvalidConfig, "map size must be >= 1");
  std::vector<RocPoint> roc;
  roc.reserve(pfas.size());
  for (std::size_t p = 0; p < pfas.size(); ++p) {
    const auto& per_cpi = scores[p];
    if (per_cpi.empty()) throw Error(ErrorKind::InvalidConfig, "ROC needs at least one CPI");
    if (per_cpi.size() != scores.front().size()) throw Error(ErrorKind::Dimension, "CPI count differs across pfas");
    RocPoint pt;
    pt.pfa_theoretical = pfas[p];
    pt.n_cpis = per_cpi.size();
    std::size_t md = 0, fa = 0;
    for (const auto& s : per_cpi) {
      pt.md_counts.push_back(s.missed);
      pt.fa_counts.push_back(s.false_alarms);
      md += s.missed;
      fa += s.false_alarms;
    }
    const double n = static_cast<double>(pt.n_cpis);
    pt.pd_rate = 1.0 - static_cast<double>(md) / n;
    pt.fa_rate = static_cast<double>(fa) / (n * static_cast<double>(n_cells));
    roc.push_back(std::move(pt));
  }
  return roc;
}

double pd_at_fa(std::span<const RocPoint> roc, double fa) {
  if (roc.empty()) throw Error(ErrorKind::InvalidConfig, "empty ROC");
  if (!(fa > 0.0)) throw Error(ErrorKind::InvalidConfig, "matched FA rate must be > 0");
  std::vector<const RocPoint*> pts;
  for (const auto& p : roc) {
    if (p.fa_rate > 0.0) pts.push_back(&p);
  }
  if (pts.empty()) return roc.back().pd_rate;
  if (fa <= pts.front()->fa_rate) return pts.front()->pd_rate;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double x0 = std::log10(pts[i]->fa_rate), x1 = std::log10(pts[i + 1]->fa_rate);
    const double x = std::log10(fa);
    if (x > x1) continue;
    if (x1 <= x0) return pts[i + 1]->pd_rate;
    const double t = (x - x0) / (x1 - x0);
    return pts[i]->pd_rate + t * (pts[i + 1]->pd_rate - pts[i]->pd_rate);
  }
  return pts.back()->pd_rate;
}

std::vector<RocPoint> run_detection_study(std::span<const env::RadarAction> actions,
                                          std::span<const env::OccupancyVector> occupancy,
                                          const DetectionStudy& study) {
  const auto& cfg = study.radar;
  cfg.validate();
  study.cfar.validate();
  if (study.pfas.empty()) throw Error(ErrorKind::InvalidConfig, "detection study needs at least one pfa");
  if (!std::is_sorted(study.pfas.begin(), study.pfas.end())) {
    throw Error(ErrorKind::InvalidConfig, "pfa list must be ascending");
  }
  if (actions.size() != occupancy.size()) throw Error(ErrorKind::Dimension, "action/occupancy streams differ in length");
  const std::size_t k = cfg.pulses_per_cpi;
  const std::size_t total = study.n_cpis * k;
  if (study.n_cpis == 0 || total > actions.size()) {
    throw Error(ErrorKind::Range, "stream holds " + std::to_string(actions.size()) + " decisions; " +
                                      std::to_string(total) + " are needed");
  }
  const std::size_t start = actions.size() - total;
  const Cell truth = truth_cell(study.scene, cfg);
  std::vector<std::vector<CpiScore>> scores(study.pfas.size(), std::vector<CpiScore>(study.n_cpis));
  std::size_t n_cells = 0;
  for (std::size_t j = 0; j < study.n_cpis; ++j) {
    const std::size_t off = start + j * k;
    Scene scene = study.scene;
    scene.schedule.assign(occupancy.begin() + static_cast<std::ptrdiff_t>(off),
                          occupancy.begin() + static_cast<std::ptrdiff_t>(off + k));
    const auto acts = actions.subspan(off, k);
    const auto rx = synthesize_cpi(acts, scene, cfg, derive_seed(study.seed, j));
    const auto map = process_cpi(rx, acts, cfg);
    n_cells = map.n_cells();
    const auto stat = cfar_statistic(map, study.cfar);
    for (std::size_t p = 0; p < study.pfas.size(); ++p) {
      scores[p][j] = score_cpi(threshold(stat, study.pfas[p]), truth);
    }
  }
  return roc_curve(scores, n_cells, study.pfas);
}

// -- measurements ------------------------------------------------------------

double compressed_pulse_width(const env::RadarAction& action, const RadarConfig& cfg, std::size_t oversample) {
  if (oversample < 1) throw Error(ErrorKind::InvalidConfig, "oversample must be >= 1");
  const auto s = lfm_chirp(action, cfg);
  const std::size_t nfft = next_pow2(2 * s.size());
  const auto sp = spectrum(s, nfft);
  // |S|^2 zero-padded in frequency gives the autocorrelation on a finer lag grid.
  const std::size_t big = nfft * oversample;
  std::vector<cplx> r(big);
  for (std::size_t k = 0; k < nfft; ++k) {
    const std::size_t dst = k < nfft / 2 ? k : big - (nfft - k);
    r[dst] = std::norm(sp[k]);
  }
  ifft(r);
  const double peak = std::norm(r[0]);
  for (std::size_t i = 1; i < big / 2; ++i) {
    const double p = std::norm(r[i]);
    if (p < 0.5 * peak) {
      const double p_prev = std::norm(r[i - 1]);
      const double frac = (p_prev - 0.5 * peak) / (p_prev - p);
      const double half_width = (static_cast<double>(i - 1) + frac) / static_cast<double>(oversample);
      return 2.0 * half_width / cfg.sample_rate;
    }
  }
  throw Error(ErrorKind::Numeric, "compressed pulse never falls 3 dB below its peak");
}

double doppler_peak_to_sidelobe_db(const RangeDopplerMap& map, std::size_t range_bin) {
  if (range_bin >= map.rows) throw Error(ErrorKind::Range, "range bin outside the map");
  if (map.cols < 4) throw Error(ErrorKind::Dimension, "Doppler cut too short for a sidelobe measurement");
  const double* cut = map.power.data() + range_bin * map.cols;
  const auto peak_bin = static_cast<std::size_t>(std::max_element(cut, cut + map.cols) - cut);
  double side = 0.0;
  for (std::size_t d = 0; d < map.cols; ++d) {
    if (circular_distance(d, peak_bin, map.cols) > 1) side = std::max(side, cut[d]);
  }
  if (side <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(cut[peak_bin] / side);
}

// -- export ------------------------------------------------------------------

void write_range_doppler_csv(const RangeDopplerMap& map, const std::filesystem::path& path) {
  write_file(path, std::ios::out, [&](std::ostream& out) {
    out.precision(12);
    out << "range_bin,doppler_bin,power\n";
    for (std::size_t r = 0; r < map.rows; ++r) {
      for (std::size_t d = 0; d < map.cols; ++d) out << r << ',' << d << ',' << map.at(r, d) << '\n';
    }
  });
}

void write_roc_csv(std::span<const RocPoint> roc, const std::filesystem::path& path) {
  write_file(path, std::ios::out, [&](std::ostream& out) {
    out.precision(12);
    out << "pfa_theoretical,pd_rate,fa_rate\n";
    for (const auto& p : roc) out << p.pfa_theoretical << ',' << p.pd_rate << ',' << p.fa_rate << '\n';
  });
}

namespace {
constexpr char kMatrixMagic[4] = {'C', 'R', 'P', 'M'};
}

void write_pulse_matrix(const PulseMatrix& m, const std::filesystem::path& path) {
  write_file(path, std::ios::out | std::ios::binary, [&](std::ostream& out) {
    const std::uint64_t shape[2] = {m.pulses, m.samples};
    out.write(kMatrixMagic, sizeof kMatrixMagic);
    out.write(reinterpret_cast<const char*>(shape), sizeof shape);
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(cplx)));
  });
}

PulseMatrix read_pulse_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  char magic[4];
  std::uint64_t shape[2];
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(shape), sizeof shape);
  if (!in || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) {
    throw Error(ErrorKind::Io, path.string() + " is not a pulse-matrix dump");
  }
  PulseMatrix m(shape[0], shape[1]);
  in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(cplx)));
  if (!in) throw Error(ErrorKind::Io, path.string() + " is truncated");
  return m;
}

}  // namespace cradar::dsp
