#include "cradar/spectrum_env.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "cradar/error.hpp"
#include "cradar/seeding.hpp"

namespace cradar {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Range: return "range";
    case ErrorKind::TraceExhausted: return "trace-exhausted";
    case ErrorKind::InvalidAction: return "invalid-action";
    case ErrorKind::EmptyModel: return "empty-model";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace cradar

namespace cradar::env {
namespace {

constexpr std::size_t kIndexBits = std::numeric_limits<StateIndex>::digits;

void check_bands(const std::vector<std::size_t>& bands, std::size_t n_subbands) {
  for (auto b : bands) {
    if (b >= n_subbands) {
      throw Error(ErrorKind::InvalidConfig,
                  "interference band " + std::to_string(b) + " outside " + std::to_string(n_subbands) +
                      " sub-bands");
    }
  }
}

OccupancyVector bands_on(const std::vector<std::size_t>& bands, std::size_t n_subbands) {
  OccupancyVector occ(n_subbands);
  for (auto b : bands) occ.bits.at(b) = 1;
  return occ;
}

}  // namespace

void EnvConfig::validate() const {
  if (n_subbands < 1) throw Error(ErrorKind::InvalidConfig, "n_subbands must be >= 1");
  if (history_depth < 1) throw Error(ErrorKind::InvalidConfig, "history_depth must be >= 1");
  if (adaptation_limit < 1) throw Error(ErrorKind::InvalidConfig, "adaptation_limit must be >= 1");
  if (cpi_pulses < 1) throw Error(ErrorKind::InvalidConfig, "cpi_pulses must be >= 1");
  if (sense_jitter_db < 0.0) throw Error(ErrorKind::InvalidConfig, "sense_jitter_db must be >= 0");
  (void)count_states(n_subbands, history_depth);
}

OccupancyVector::OccupancyVector(std::initializer_list<int> values) {
  bits.reserve(values.size());
  for (int v : values) bits.push_back(v != 0 ? 1 : 0);
}

std::size_t OccupancyVector::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::string OccupancyVector::to_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (i) s += ",";
    s += bits[i] ? '1' : '0';
  }
  return s + "]";
}

std::vector<double> InterferenceState::features() const {
  std::vector<double> x;
  for (const auto& occ : history) {
    for (auto b : occ.bits) x.push_back(b ? 1.0 : 0.0);
  }
  return x;
}

OccupancyVector RadarAction::mask(std::size_t n_subbands) const {
  if (hi >= n_subbands || lo > hi) {
    throw Error(ErrorKind::InvalidAction, "action " + to_string() + " invalid for " +
                                              std::to_string(n_subbands) + " sub-bands");
  }
  OccupancyVector m(n_subbands);
  for (std::size_t i = lo; i <= hi; ++i) m.bits[i] = 1;
  return m;
}

std::string RadarAction::to_string() const {
  return "{" + std::to_string(lo) + "," + std::to_string(hi) + "}";
}

void validate_source(const InterferenceSource& source, std::size_t n_subbands) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TddSource>) {
          check_bands(s.bands, n_subbands);
          if (s.on_steps + s.off_steps < 1) {
            throw Error(ErrorKind::InvalidConfig, "tdd on_steps + off_steps must be >= 1");
          }
        } else if constexpr (std::is_same_v<T, FddSource>) {
          check_bands(s.bands, n_subbands);
          if (s.activity < 0.0 || s.activity > 1.0) {
            throw Error(ErrorKind::InvalidConfig, "fdd activity must lie in [0, 1]");
          }
        } else {
          if (s.rows.empty()) throw Error(ErrorKind::InvalidConfig, "trace source has no rows");
          for (const auto& r : s.rows) {
            if (r.size() != n_subbands) {
              throw Error(ErrorKind::Dimension, "trace row width " + std::to_string(r.size()) +
                                                    " != " + std::to_string(n_subbands));
            }
          }
        }
      },
      source);
}

std::size_t count_actions(std::size_t n_subbands) { return n_subbands * (n_subbands + 1) / 2; }

std::vector<RadarAction> enumerate_actions(std::size_t n_subbands) {
  if (n_subbands == 0) throw Error(ErrorKind::InvalidConfig, "n_subbands must be >= 1");
  std::vector<RadarAction> out;
  out.reserve(count_actions(n_subbands));
  for (std::size_t lo = 0; lo < n_subbands; ++lo) {
    for (std::size_t hi = lo; hi < n_subbands; ++hi) out.push_back({lo, hi});
  }
  return out;
}

std::size_t action_index(const RadarAction& action, std::size_t n_subbands) {
  if (action.lo > action.hi || action.hi >= n_subbands) {
    throw Error(ErrorKind::InvalidAction, "action " + action.to_string() + " out of range");
  }
  // Actions with lower lo precede: sum over l < lo of (N - l).
  const std::size_t lo = action.lo;
  return lo * n_subbands - (lo * (lo - 1)) / 2 + (action.hi - action.lo);
}

StateIndex count_states(std::size_t n_subbands, std::size_t history_depth) {
  if (n_subbands < 1 || history_depth < 1) {
    throw Error(ErrorKind::InvalidConfig, "n_subbands and history_depth must be >= 1");
  }
  if (history_depth > (kIndexBits - 1) / n_subbands) {
    throw Error(ErrorKind::InvalidConfig, "2^(M*N) overflows the state index type");
  }
  return StateIndex{1} << (history_depth * n_subbands);
}

OccupancyVector sense(std::span<const double> powers_db, double p0) {
  OccupancyVector occ(powers_db.size());
  for (std::size_t i = 0; i < powers_db.size(); ++i) occ.bits[i] = powers_db[i] >= p0 ? 1 : 0;
  return occ;
}

std::vector<double> synthetic_powers(const OccupancyVector& truth, double p0, double jitter_db,
                                     std::mt19937_64& rng) {
  std::vector<double> p(truth.size());
  std::normal_distribution<double> jitter(0.0, jitter_db > 0.0 ? jitter_db : 1.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    p[i] = truth.bits[i] ? p0 + 10.0 : p0 - 10.0;
    if (jitter_db > 0.0) p[i] += jitter(rng);
  }
  return p;
}

InterferenceState encode_state(std::span<const OccupancyVector> history, std::size_t n_subbands,
                               std::size_t history_depth) {
  if (history.size() != history_depth) {
    throw Error(ErrorKind::Dimension, "history length " + std::to_string(history.size()) +
                                          " != depth " + std::to_string(history_depth));
  }
  (void)count_states(n_subbands, history_depth);
  InterferenceState s;
  s.history.assign(history.begin(), history.end());
  StateIndex index = 0;
  for (const auto& occ : history) {
    if (occ.size() != n_subbands) {
      throw Error(ErrorKind::Dimension, "occupancy width " + std::to_string(occ.size()) +
                                            " != " + std::to_string(n_subbands));
    }
    for (auto b : occ.bits) index = (index << 1) | (b ? 1u : 0u);
  }
  s.index = index;
  return s;
}

std::vector<OccupancyVector> decode_state(StateIndex index, std::size_t n_subbands,
                                          std::size_t history_depth) {
  const StateIndex n_states = count_states(n_subbands, history_depth);
  if (index >= n_states) {
    throw Error(ErrorKind::Range, "state index " + std::to_string(index) + " >= " +
                                      std::to_string(n_states));
  }
  std::vector<OccupancyVector> history(history_depth, OccupancyVector(n_subbands));
  for (std::size_t k = history_depth; k-- > 0;) {
    for (std::size_t i = n_subbands; i-- > 0;) {
      history[k].bits[i] = static_cast<std::uint8_t>(index & 1u);
      index >>= 1;
    }
  }
  return history;
}

OccupancyVector advance_interference(const InterferenceSource& source, std::size_t t,
                                     std::size_t n_subbands) {
  return std::visit(
      [&](const auto& s) -> OccupancyVector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TddSource>) {
          const std::size_t period = s.on_steps + s.off_steps;
          if (period == 0) throw Error(ErrorKind::InvalidConfig, "tdd period is zero");
          if ((t + s.phase) % period < s.on_steps) return bands_on(s.bands, n_subbands);
          return OccupancyVector(n_subbands);
        } else if constexpr (std::is_same_v<T, FddSource>) {
          if (s.activity >= 1.0) return bands_on(s.bands, n_subbands);
          const std::uint64_t h = derive_seed(s.seed, static_cast<std::uint64_t>(t));
          const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
          if (u < s.activity) return bands_on(s.bands, n_subbands);
          return OccupancyVector(n_subbands);
        } else {
          if (s.rows.empty()) throw Error(ErrorKind::InvalidConfig, "trace source has no rows");
          if (t >= s.rows.size() && !s.wrap) {
            throw Error(ErrorKind::TraceExhausted,
                        "trace exhausted at step " + std::to_string(t) + " (" +
                            std::to_string(s.rows.size()) + " rows)");
          }
          const auto& row = s.rows[t % s.rows.size()];
          if (row.size() != n_subbands) throw Error(ErrorKind::Dimension, "trace row width mismatch");
          return row;
        }
      },
      source);
}

std::size_t count_collisions(const RadarAction& action, const OccupancyVector& occupancy) {
  if (action.lo > action.hi || action.hi >= occupancy.size()) {
    throw Error(ErrorKind::Dimension, "action " + action.to_string() + " does not fit occupancy of width " +
                                          std::to_string(occupancy.size()));
  }
  std::size_t n = 0;
  for (std::size_t i = action.lo; i <= action.hi; ++i) n += occupancy.bits[i] ? 1 : 0;
  return n;
}

RewardBreakdown compute_reward(std::size_t n_collisions, std::size_t n_subbands_used,
                               std::size_t n_adaptations, const EnvConfig& cfg) {
  if (n_subbands_used == 0) throw Error(ErrorKind::InvalidAction, "an action must use at least one sub-band");
  RewardBreakdown r;
  r.n_collisions = n_collisions;
  r.n_subbands_used = n_subbands_used;
  r.n_adaptations_in_cpi = n_adaptations;
  r.r_plus = n_collisions >= 1
                 ? cfg.collision_penalty * static_cast<double>(n_collisions)
                 : cfg.bandwidth_reward_unit * static_cast<double>(n_subbands_used - 1);
  r.r_star = n_adaptations >= cfg.adaptation_limit ? cfg.adaptation_penalty : 0.0;
  r.total = r.r_plus + r.r_star;
  return r;
}

std::vector<OccupancyVector> parse_trace(const std::string& text) {
  std::vector<OccupancyVector> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    OccupancyVector row;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      const std::string v = b == std::string::npos ? "" : field.substr(b, e - b + 1);
      if (v != "0" && v != "1") {
        throw Error(ErrorKind::InvalidConfig,
                    "trace line " + std::to_string(line_no) + ": expected 0 or 1, got '" + v + "'");
      }
      row.bits.push_back(v == "1" ? 1 : 0);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::Dimension, "trace line " + std::to_string(line_no) + " has " +
                                            std::to_string(row.size()) + " values, expected " +
                                            std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<OccupancyVector> load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open trace file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

SpectrumEnv::SpectrumEnv(EnvConfig cfg, InterferenceSource source, std::uint64_t seed)
    : cfg_(cfg), source_(std::move(source)), seed_(seed), rng_(seed) {
  cfg_.validate();
  validate_source(source_, cfg_.n_subbands);
  actions_ = enumerate_actions(cfg_.n_subbands);
  reset();
}

OccupancyVector SpectrumEnv::sensed(const OccupancyVector& truth) {
  if (cfg_.sense_jitter_db <= 0.0) return truth;
  const auto powers = synthetic_powers(truth, cfg_.sense_threshold_p0, cfg_.sense_jitter_db, rng_);
  return sense(powers, cfg_.sense_threshold_p0);
}

void SpectrumEnv::reset() {
  rng_.seed(seed_);
  std::vector<OccupancyVector> history;
  for (std::size_t t = 0; t < cfg_.history_depth; ++t) {
    history.push_back(sensed(advance_interference(source_, t, cfg_.n_subbands)));
  }
  state_ = encode_state(history, cfg_.n_subbands, cfg_.history_depth);
  t_ = cfg_.history_depth;
  decisions_ = 0;
  adaptations_in_cpi_ = 0;
  has_previous_ = false;
}

void SpectrumEnv::reset(std::vector<OccupancyVector> history, std::size_t t) {
  rng_.seed(seed_);
  state_ = encode_state(history, cfg_.n_subbands, cfg_.history_depth);
  t_ = t;
  decisions_ = 0;
  adaptations_in_cpi_ = 0;
  has_previous_ = false;
}

StepResult SpectrumEnv::step(const RadarAction& action) {
  (void)action_index(action, cfg_.n_subbands);
  StepResult out;
  out.occupancy = advance_interference(source_, t_, cfg_.n_subbands);

  if (decisions_ % cfg_.cpi_pulses == 0) adaptations_in_cpi_ = 0;
  if (has_previous_ && !(action == previous_)) ++adaptations_in_cpi_;
  previous_ = action;
  has_previous_ = true;
  ++decisions_;

  out.reward = compute_reward(count_collisions(action, out.occupancy), action.width(),
                              adaptations_in_cpi_, cfg_);

  std::vector<OccupancyVector> history(state_.history.begin() + 1, state_.history.end());
  history.push_back(sensed(out.occupancy));
  InterferenceState next = encode_state(history, cfg_.n_subbands, cfg_.history_depth);

  out.transition = Transition{state_, action, out.reward.total, next};
  state_ = std::move(next);
  ++t_;
  return out;
}

}  // namespace cradar::env
