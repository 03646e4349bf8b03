#include "cradar/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cradar/error.hpp"
#include "cradar/seeding.hpp"

namespace cradar::harness {
namespace {

// Sub-stream ids for seeds derived from the run seed (3 and 4 seed FDD sources).
constexpr std::uint64_t kAgentStream = 1;
constexpr std::uint64_t kTrainEnvStream = 2;
constexpr std::uint64_t kEvalEnvStream = 5;
constexpr std::uint64_t kDetectionStream = 6;

bool trains(agents::Algorithm a) { return a != agents::Algorithm::Saa && a != agents::Algorithm::Random; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.precision(12);
  return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  close_out(out, path);
}

nlohmann::ordered_json matched_json(const std::vector<MatchedPd>& v) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : v) arr.push_back({{"fa_rate", m.fa_rate}, {"pd", m.pd}});
  return arr;
}

std::vector<MatchedPd> matched(std::span<const dsp::RocPoint> roc, const std::vector<double>& fas) {
  std::vector<MatchedPd> out;
  for (double fa : fas) out.push_back({fa, dsp::pd_at_fa(roc, fa)});
  return out;
}

/// Configuration with the per-run fields removed, for comparability checks.
nlohmann::ordered_json comparable(const ExperimentConfig& cfg) {
  auto j = to_json(cfg);
  j.erase("seed");
  j.erase("algorithm");
  j.erase("output_dir");
  for (const char* key : {"interference_train", "interference_eval"}) j[key].erase("seed");
  return j;
}

}  // namespace

SharingReport compute_sharing_report(std::span<const env::RadarAction> actions,
                                     std::span<const env::OccupancyVector> occupancy, std::size_t window) {
  if (actions.size() != occupancy.size()) throw Error(ErrorKind::Dimension, "action and occupancy streams differ in length");
  if (window == 0 || window > actions.size()) {
    throw Error(ErrorKind::Dimension, "window " + std::to_string(window) + " exceeds the " +
                                          std::to_string(actions.size()) + "-decision stream");
  }
  SharingReport r;
  r.window = window;
  const std::size_t start = actions.size() - window;
  for (std::size_t t = start; t < actions.size(); ++t) {
    const auto& a = actions[t];
    const auto& occ = occupancy[t];
    for (std::size_t b = 0; b < occ.size(); ++b) {
      const bool tx = a.covers(b);
      if (occ.occupied(b)) {
        tx ? ++r.n_collisions : ++r.n_avoided;
      } else {
        tx ? ++r.n_used_open : ++r.n_missed_opportunities;
      }
    }
    if (t > start && !(actions[t] == actions[t - 1])) ++r.n_adaptations;
  }
  r.pct_waveform_adapt = 100.0 * static_cast<double>(r.n_adaptations) / static_cast<double>(window);
  return r;
}

double ExperimentResult::final_quartile_reward() const {
  if (online.empty()) throw Error(ErrorKind::EmptyModel, "no online epochs");
  const std::size_t n = std::max<std::size_t>(1, online.size() / 4);
  double sum = 0.0;
  for (std::size_t i = online.size() - n; i < online.size(); ++i) sum += online[i].mean_reward;
  return sum / static_cast<double>(n);
}

double ExperimentResult::first_online_reward() const {
  if (online.empty()) throw Error(ErrorKind::EmptyModel, "no online epochs");
  return online.front().mean_reward;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  res.algorithm = cfg.agent.algorithm;
  res.seed = cfg.seed;

  agents::AgentConfig agent_cfg = cfg.agent;
  agent_cfg.seed = derive_seed(cfg.seed, kAgentStream);
  auto agent = agents::make_agent(cfg.env, agent_cfg);

  if (trains(cfg.agent.algorithm)) {
    env::SpectrumEnv train_env(cfg.env, cfg.interference_train.source, derive_seed(cfg.seed, kTrainEnvStream));
    res.offline = agents::offline_train(*agent, train_env, agent_cfg);
  }
  env::SpectrumEnv eval_env(cfg.env, cfg.interference_eval.source, derive_seed(cfg.seed, kEvalEnvStream));
  res.online = agents::online_evaluate(*agent, eval_env, agent_cfg, &res.log);
  res.sharing = compute_sharing_report(res.log.actions, res.log.occupancy, cfg.sharing_window);
  if (const auto* pi = dynamic_cast<const agents::PolicyIterationAgent*>(agent.get())) {
    res.unvisited_lookups = pi->unvisited_lookups();
  }

  if (cfg.detection.enabled) {
    dsp::DetectionStudy study;
    study.radar = cfg.radar;
    study.cfar = dsp::CfarConfig{cfg.detection.n_train, cfg.detection.n_guard, cfg.detection.pfas.front()};
    study.pfas = cfg.detection.pfas;
    study.scene = cfg.detection_scene();
    study.n_cpis = cfg.detection.n_cpis;
    // Shared by every algorithm run with this seed: common noise across comparisons.
    study.seed = derive_seed(cfg.seed, kDetectionStream);
    res.roc = dsp::run_detection_study(res.log.actions, res.log.occupancy, study);
    res.pd_at_fa = matched(res.roc, cfg.detection.matched_fa);
    if (cfg.detection.no_rfi_baseline) {
      const std::size_t n = res.log.actions.size();
      const std::vector<env::RadarAction> full(n, env::RadarAction{0, cfg.env.n_subbands - 1});
      const std::vector<env::OccupancyVector> clear(n, env::OccupancyVector(cfg.env.n_subbands));
      res.roc_no_rfi = dsp::run_detection_study(full, clear, study);
      res.pd_at_fa_no_rfi = matched(res.roc_no_rfi, cfg.detection.matched_fa);
    }
  }
  return res;
}

void write_epoch_csv(std::span<const agents::EpochStats> stats, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "epoch,mean_reward,collisions,missed,adaptations\n";
  for (const auto& s : stats) {
    out << s.epoch << ',' << s.mean_reward << ',' << s.collisions << ',' << s.missed_opportunities << ','
        << s.adaptations << '\n';
  }
  close_out(out, path);
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  const auto& dir = cfg.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  if (trains(result.algorithm)) write_epoch_csv(result.offline, dir / "offline_epochs.csv");
  write_epoch_csv(result.online, dir / "online_epochs.csv");
  if (!result.roc.empty()) dsp::write_roc_csv(result.roc, dir / "roc.csv");
  if (!result.roc_no_rfi.empty()) dsp::write_roc_csv(result.roc_no_rfi, dir / "roc_no_rfi.csv");

  const auto cfg_json = to_json(cfg);
  nlohmann::ordered_json sharing;
  sharing["algorithm"] = agents::to_string(result.algorithm);
  sharing["seed"] = result.seed;
  sharing["window"] = result.sharing.window;
  sharing["n_collisions"] = result.sharing.n_collisions;
  sharing["n_missed_opportunities"] = result.sharing.n_missed_opportunities;
  sharing["n_adaptations"] = result.sharing.n_adaptations;
  sharing["pct_waveform_adapt"] = result.sharing.pct_waveform_adapt;
  sharing["config"] = cfg_json;
  write_json(sharing, dir / "sharing.json");

  nlohmann::ordered_json summary;
  summary["algorithm"] = agents::to_string(result.algorithm);
  summary["seed"] = result.seed;
  summary["first_online_reward"] = result.first_online_reward();
  summary["final_quartile_reward"] = result.final_quartile_reward();
  summary["pd_at_fa"] = matched_json(result.pd_at_fa);
  if (!result.pd_at_fa_no_rfi.empty()) summary["pd_at_fa_no_rfi"] = matched_json(result.pd_at_fa_no_rfi);
  if (result.algorithm == agents::Algorithm::PolicyIteration) summary["unvisited_lookups"] = result.unvisited_lookups;
  write_json(summary, dir / "summary.json");
  write_json(cfg_json, dir / "resolved_config.json");
}

std::vector<ComparisonRow> summarize(std::span<const ExperimentResult> results) {
  std::vector<ComparisonRow> rows;
  for (const auto& r : results) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const ComparisonRow& row) { return row.algorithm == r.algorithm; });
    if (it == rows.end()) {
      rows.push_back(ComparisonRow{r.algorithm});
      it = rows.end() - 1;
    }
    ++it->n_seeds;
    it->final_quartile_reward += r.final_quartile_reward();
    if (r.pd_at_fa.empty()) {
      it->pd_at_fa = std::numeric_limits<double>::quiet_NaN();
      it->fa_rate = std::numeric_limits<double>::quiet_NaN();
    } else {
      it->pd_at_fa += r.pd_at_fa.front().pd;
      it->fa_rate = r.pd_at_fa.front().fa_rate;
    }
    it->collisions += static_cast<double>(r.sharing.n_collisions);
    it->missed_opportunities += static_cast<double>(r.sharing.n_missed_opportunities);
    it->pct_waveform_adapt += r.sharing.pct_waveform_adapt;
  }
  for (auto& row : rows) {
    const double n = static_cast<double>(row.n_seeds);
    row.final_quartile_reward /= n;
    row.pd_at_fa /= n;
    row.collisions /= n;
    row.missed_opportunities /= n;
    row.pct_waveform_adapt /= n;
  }
  return rows;
}

std::vector<ComparisonRow> compare_algorithms(std::span<const ExperimentConfig> configs,
                                              std::vector<ExperimentResult>* results) {
  if (configs.empty()) throw Error(ErrorKind::InvalidConfig, "nothing to compare");
  const auto reference = comparable(configs.front());
  std::vector<ExperimentResult> local;
  for (const auto& cfg : configs) {
    if (comparable(cfg) != reference) {
      throw Error(ErrorKind::InvalidConfig, "compared configurations may differ only in algorithm and seed");
    }
    local.push_back(run_experiment(cfg));
  }
  auto rows = summarize(local);
  if (results) *results = std::move(local);
  return rows;
}

void write_comparison_csv(std::span<const ComparisonRow> rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "algorithm,n_seeds,final_quartile_reward,pd_at_fa,fa_rate,collisions,missed_opportunities,"
         "pct_waveform_adapt\n";
  for (const auto& r : rows) {
    out << agents::to_string(r.algorithm) << ',' << r.n_seeds << ',' << r.final_quartile_reward << ','
        << r.pd_at_fa << ',' << r.fa_rate << ',' << r.collisions << ',' << r.missed_opportunities << ','
        << r.pct_waveform_adapt << '\n';
  }
  close_out(out, path);
}

}  // namespace cradar::harness
