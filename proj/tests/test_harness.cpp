#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cradar/config.hpp"
#include "cradar/harness.hpp"
#include "support.hpp"

using namespace cradar;
using namespace cradar::harness;
using cradar::testing::error_kind;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "cradar_harness_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Small but complete experiment: two online epochs, two detection CPIs.
ExperimentConfig small_config(const std::string& algorithm, std::uint64_t seed, const fs::path& out) {
  return parse_config("", {{"algorithm", algorithm},
                           {"seed", std::to_string(seed)},
                           {"output_dir", out.string()},
                           {"agent.offline_epochs", "3"},
                           {"agent.online_epochs", "2"},
                           {"agent.hidden_width", "16"},
                           {"detection.n_cpis", "2"},
                           {"detection.no_rfi_baseline", "true"}});
}

/// Independent recount of the sharing tallies.
SharingReport recount(const std::vector<env::RadarAction>& a, const std::vector<env::OccupancyVector>& occ,
                      std::size_t window) {
  SharingReport r;
  r.window = window;
  for (std::size_t t = a.size() - window; t < a.size(); ++t) {
    const auto mask = a[t].mask(occ[t].size());
    for (std::size_t b = 0; b < occ[t].size(); ++b) {
      const int o = occ[t].bits[b], m = mask.bits[b];
      r.n_collisions += o && m;
      r.n_missed_opportunities += !o && !m;
      r.n_avoided += o && !m;
      r.n_used_open += !o && m;
    }
    if (t != a.size() - window && a[t].lo + 10 * a[t].hi != a[t - 1].lo + 10 * a[t - 1].hi) ++r.n_adaptations;
  }
  r.pct_waveform_adapt = 100.0 * static_cast<double>(r.n_adaptations) / static_cast<double>(window);
  return r;
}

int run_cli(const std::string& args, const fs::path& stderr_file) {
  const std::string cmd = std::string(CRADAR_CLI_PATH) + " " + args + " >/dev/null 2>" + stderr_file.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("radar matching the open complement neither collides nor misses") {
  std::vector<env::RadarAction> a;
  std::vector<env::OccupancyVector> occ;
  for (int t = 0; t < 10; ++t) {
    occ.push_back(t % 2 ? env::OccupancyVector{1, 1, 0, 0, 0} : env::OccupancyVector{0, 0, 0, 1, 1});
    a.push_back(t % 2 ? env::RadarAction{2, 4} : env::RadarAction{0, 2});
  }
  const auto r = compute_sharing_report(a, occ, 10);
  CHECK(r.n_collisions == 0);
  CHECK(r.n_missed_opportunities == 0);
  CHECK(r.n_adaptations == 9);
}

TEST_CASE("adaptation percentage over a 101-decision window") {
  std::vector<env::RadarAction> a(101, env::RadarAction{0, 4});
  for (std::size_t t = 1; t < a.size(); ++t) {
    const bool toggle = t <= 43;
    a[t] = toggle == (a[t - 1] == env::RadarAction{0, 4}) ? env::RadarAction{0, 2} : env::RadarAction{0, 4};
  }
  const std::vector<env::OccupancyVector> occ(101, env::OccupancyVector{0, 0, 0, 0, 0});
  const auto r = compute_sharing_report(a, occ, 101);
  CHECK(r.n_adaptations == 43);
  CHECK(r.pct_waveform_adapt == doctest::Approx(42.574).epsilon(1e-4));
  const auto constant = compute_sharing_report(std::vector<env::RadarAction>(101, env::RadarAction{1, 1}), occ, 101);
  CHECK(constant.pct_waveform_adapt == 0.0);
}

TEST_CASE("a fixed single-band radar misses the two other open bands") {
  const std::vector<env::RadarAction> a(20, env::RadarAction{0, 0});
  const std::vector<env::OccupancyVector> occ(20, env::OccupancyVector{0, 0, 0, 1, 1});
  const auto r = compute_sharing_report(a, occ, 20);
  CHECK(r.n_missed_opportunities == 2 * 20);
  CHECK(r.n_collisions == 0);
}

TEST_CASE("sharing report equals a brute-force recount and satisfies the slot identity") {
  std::mt19937_64 rng(31);
  const auto actions = env::enumerate_actions(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 50 + rng() % 200;
    std::vector<env::RadarAction> a(n);
    std::vector<env::OccupancyVector> occ(n);
    for (std::size_t t = 0; t < n; ++t) {
      a[t] = actions[rng() % (trial % 2 ? 3 : 15)];
      occ[t] = env::decode_state(rng() % 32, 5, 1).front();
    }
    const std::size_t window = 1 + rng() % n;
    const auto r = compute_sharing_report(a, occ, window);
    const auto b = recount(a, occ, window);
    CHECK(r.n_collisions == b.n_collisions);
    CHECK(r.n_missed_opportunities == b.n_missed_opportunities);
    CHECK(r.n_avoided == b.n_avoided);
    CHECK(r.n_used_open == b.n_used_open);
    CHECK(r.n_adaptations == b.n_adaptations);
    CHECK(r.n_collisions + r.n_missed_opportunities + r.n_avoided + r.n_used_open == window * 5);
    CHECK(r.pct_waveform_adapt >= 0.0);
    CHECK(r.pct_waveform_adapt <= 100.0);
  }
  const std::vector<env::RadarAction> a(5);
  const std::vector<env::OccupancyVector> occ(4, env::OccupancyVector{0, 0, 0, 0, 0});
  CHECK(error_kind([&] { compute_sharing_report(a, occ, 4); }) == ErrorKind::Dimension);
  CHECK(error_kind([&] { compute_sharing_report(std::span(a).first(4), occ, 5); }) == ErrorKind::Dimension);
}

TEST_CASE("empty configuration resolves to the desk defaults") {
  const auto cfg = parse_config("");
  CHECK(to_json(cfg) == to_json(default_config(Scale::Desk)));
  CHECK(cfg.radar.sample_rate == 25e6);
  CHECK(cfg.env.cpi_pulses == 64);
  CHECK(std::get<env::TddSource>(cfg.interference_train.source).on_steps == 2);
  CHECK(std::get<env::TddSource>(cfg.interference_eval.source).on_steps == 3);
  const auto full = parse_config("scale: full\n");
  CHECK(full.radar.pulses_per_cpi == 1000);
  CHECK(full.env.cpi_pulses == 1000);
  CHECK(full.agent.online_epochs * full.agent.steps_per_epoch >= full.detection.n_cpis * 1000);
}

TEST_CASE("overrides, unknown keys and invalid values") {
  const auto cfg = parse_config("agent:\n  gamma: 0.5\n", {{"agent.learning_rate", "5e-4"}, {"seed", "7"}});
  CHECK(cfg.agent.gamma == 0.5);
  CHECK(cfg.agent.sgd.learning_rate == 5e-4);
  CHECK(cfg.seed == 7);
  CHECK(error_kind([] { parse_config("agent:\n  lerning_rate: 0.1\n"); }) == ErrorKind::InvalidConfig);
  CHECK(error_kind([] { parse_config("", {{"radar.bogus", "1"}}); }) == ErrorKind::InvalidConfig);
  CHECK(error_kind([] { parse_config("agent:\n  gamma: 1.5\n"); }) == ErrorKind::InvalidConfig);
  CHECK(error_kind([] { parse_config("scale: huge\n"); }) == ErrorKind::InvalidConfig);
  CHECK(error_kind([] { parse_config("[1, 2]"); }) == ErrorKind::InvalidConfig);
  CHECK(error_kind([] { parse_config("", {{"agent.online_epochs", "10"}}); }) == ErrorKind::InvalidConfig);
  CHECK(error_kind([] { load_config("/nonexistent/cradar.yaml"); }) == ErrorKind::Io);
}

TEST_CASE("resolved JSON loads back to the same configuration") {
  const auto cfg = parse_config("interference_eval:\n  type: fdd\n  bands: [0, 1]\n  activity: 0.7\n",
                                {{"seed", "4"}, {"algorithm", "drqn"}});
  const auto back = parse_config(to_json(cfg).dump());
  CHECK(to_json(back) == to_json(cfg));
  CHECK(back.agent.algorithm == agents::Algorithm::Drqn);
}

TEST_CASE("shipped scenario files load") {
  const auto tdd = load_config(fs::path(CRADAR_CONFIG_DIR) / "tdd.yaml");
  CHECK(to_json(tdd)["interference_eval"] == to_json(default_config(Scale::Desk))["interference_eval"]);
  const auto fdd = load_config(fs::path(CRADAR_CONFIG_DIR) / "fdd.yaml");
  const auto& train = std::get<env::FddSource>(fdd.interference_train.source);
  const auto& eval = std::get<env::FddSource>(fdd.interference_eval.source);
  CHECK(train.bands == std::vector<std::size_t>{1, 2});
  CHECK(eval.bands == std::vector<std::size_t>{0, 1});
  CHECK(train.seed != eval.seed);
  const auto other = load_config(fs::path(CRADAR_CONFIG_DIR) / "fdd.yaml", {{"seed", "1"}});
  CHECK(std::get<env::FddSource>(other.interference_train.source).seed != train.seed);
}

TEST_CASE("trace sources resolve relative to the configuration file") {
  const auto dir = scratch("trace");
  {
    std::ofstream(dir / "occ.csv") << "# two rows\n0,1,1,0,0\n0,0,0,0,1\n";
    std::ofstream(dir / "exp.yaml") << "interference_eval:\n  type: trace\n  path: occ.csv\n";
  }
  const auto cfg = load_config(dir / "exp.yaml");
  CHECK(std::get<env::TraceSource>(cfg.interference_eval.source).rows.size() == 2);
  CHECK(to_json(cfg)["interference_eval"]["path"] == (dir / "occ.csv").string());
}

TEST_CASE("sense-and-avoid runs with no offline phase") {
  const auto dir = scratch("saa");
  const auto cfg = small_config("saa", 0, dir);
  const auto r = run_experiment(cfg);
  CHECK(r.offline.empty());
  CHECK(r.online.size() == 2);
  CHECK(r.log.actions.size() == 202);
  CHECK(r.sharing.window == 101);
  CHECK(r.roc.size() == cfg.detection.pfas.size());
  CHECK(r.pd_at_fa.size() == 2);
  write_outputs(cfg, r);
  CHECK_FALSE(fs::exists(dir / "offline_epochs.csv"));
  for (const char* f : {"online_epochs.csv", "roc.csv", "roc_no_rfi.csv", "sharing.json", "summary.json",
                        "resolved_config.json"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(slurp(dir / "online_epochs.csv").rfind("epoch,mean_reward,collisions,missed,adaptations\n", 0) == 0);
  CHECK(slurp(dir / "roc.csv").rfind("pfa_theoretical,pd_rate,fa_rate\n", 0) == 0);
  const auto sharing = nlohmann::json::parse(slurp(dir / "sharing.json"));
  CHECK(sharing["n_collisions"] == r.sharing.n_collisions);
  CHECK(sharing["config"]["seed"] == 0);
  const auto resolved = parse_config(slurp(dir / "resolved_config.json"));
  CHECK(to_json(resolved) == to_json(cfg));
}

TEST_CASE("identical configuration and seed give byte-identical outputs") {
  const auto a = scratch("repro_a"), b = scratch("repro_b");
  for (const auto& dir : {a, b}) {
    auto cfg = small_config("dqn", 5, dir);
    cfg.output_dir = dir;
    write_outputs(cfg, run_experiment(cfg));
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    std::string lhs = slurp(a / name), rhs = slurp(b / name);
    // The output directory itself is recorded in the embedded configuration.
    for (auto* s : {&lhs, &rhs}) {
      for (const auto& d : {a.string(), b.string()}) {
        for (auto pos = s->find(d); pos != std::string::npos; pos = s->find(d)) s->replace(pos, d.size(), "OUT");
      }
    }
    INFO(name.string());
    CHECK(lhs == rhs);
    ++compared;
  }
  CHECK(compared == 7);
}

TEST_CASE("single-run comparison echoes the run") {
  const auto dir = scratch("compare");
  const std::vector<ExperimentConfig> configs{small_config("saa", 2, dir)};
  std::vector<ExperimentResult> results;
  const auto rows = compare_algorithms(configs, &results);
  REQUIRE(rows.size() == 1);
  REQUIRE(results.size() == 1);
  CHECK(rows[0].n_seeds == 1);
  CHECK(rows[0].final_quartile_reward == results[0].final_quartile_reward());
  CHECK(rows[0].collisions == static_cast<double>(results[0].sharing.n_collisions));
  CHECK(rows[0].pd_at_fa == results[0].pd_at_fa.front().pd);
  write_comparison_csv(rows, dir / "compare.csv");
  CHECK(slurp(dir / "compare.csv").rfind("algorithm,n_seeds,", 0) == 0);

  auto mismatched = configs;
  mismatched.push_back(small_config("dqn", 3, dir));
  mismatched.back().inr_db = 10;
  CHECK(error_kind([&] { compare_algorithms(mismatched); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("command line runs and reports errors as a JSON line") {
  const auto dir = scratch("cli");
  const auto err = dir / "stderr.txt";
  CHECK(run_cli("run --algorithm saa --seed 1 --out " + (dir / "run").string() +
                    " --agent.online_epochs 2 --detection.n_cpis=2",
                err) == 0);
  CHECK(fs::exists(dir / "run" / "summary.json"));
  CHECK(run_cli("config --agent.gamma 1.5", err) == 2);
  const auto line = slurp(err);
  REQUIRE(line.rfind("error: ", 0) == 0);
  const auto j = nlohmann::json::parse(line.substr(7));
  CHECK(j["kind"] == "invalid-config");
  CHECK(run_cli("run --config /nonexistent.yaml", err) == 2);
  CHECK(nlohmann::json::parse(slurp(err).substr(7))["kind"] == "io");
}
