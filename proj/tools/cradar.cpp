// Command-line front end: run one experiment, compare algorithms over
// seeds, or print the resolved configuration.
//
//   cradar run --config tdd.yaml --algorithm ddqn --seed 3 --out runs/ddqn
//   cradar compare --algorithms dqn,ddqn,drqn,saa --seeds 10 --out runs/cmp
//   cradar config --scale full --agent.learning_rate 5e-4
//
// Any further `--dotted.key value` pair overrides the configuration document.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "cradar/config.hpp"
#include "cradar/error.hpp"
#include "cradar/harness.hpp"

namespace {

using cradar::Error;
using cradar::ErrorKind;
using cradar::harness::Override;

struct CommonOptions {
  std::string config;
  std::string algorithm;
  std::string scale;
  std::string out;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_algorithm) {
  cmd->add_option("--config", o.config, "Experiment configuration (YAML)");
  if (with_algorithm) {
    cmd->add_option("--algorithm", o.algorithm, "policy_iteration | dqn | ddqn | drqn | saa | random");
  }
  cmd->add_option("--seed", o.seed, "Run seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--scale", o.scale, "desk | full")->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--out", o.out, "Output directory");
  cmd->allow_extras();
}

/// Leftover tokens as `--key value` or `--key=value` pairs.
std::vector<Override> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<Override> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() == 2) {
      throw Error(ErrorKind::InvalidConfig, "unexpected argument '" + tok + "'");
    }
    const auto key = tok.substr(2);
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw Error(ErrorKind::InvalidConfig, "override '" + tok + "' has no value");
      out.emplace_back(key, extras[++i]);
    }
  }
  return out;
}

cradar::harness::ExperimentConfig resolve(const CommonOptions& o, const std::vector<std::string>& extras) {
  auto overrides = parse_overrides(extras);
  // Dedicated flags win over both the file and generic overrides.
  if (!o.scale.empty()) overrides.emplace_back("scale", o.scale);
  if (!o.algorithm.empty()) overrides.emplace_back("algorithm", o.algorithm);
  if (o.seed >= 0) overrides.emplace_back("seed", std::to_string(o.seed));
  if (!o.out.empty()) overrides.emplace_back("output_dir", o.out);
  return cradar::harness::load_config(o.config, overrides);
}

void print_run(const cradar::harness::ExperimentResult& r) {
  std::cout << cradar::agents::to_string(r.algorithm) << " seed " << r.seed << ": final-quartile reward "
            << r.final_quartile_reward() << ", collisions " << r.sharing.n_collisions << ", missed "
            << r.sharing.n_missed_opportunities << ", adaptations " << r.sharing.pct_waveform_adapt << "%";
  if (!r.pd_at_fa.empty()) std::cout << ", PD@FA=" << r.pd_at_fa.front().fa_rate << " " << r.pd_at_fa.front().pd;
  std::cout << '\n';
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Cognitive-radar spectrum-sharing simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "Train, evaluate and score one algorithm");
  add_common(run_cmd, run_opts, true);

  CommonOptions cmp_opts;
  std::string algorithms = "policy_iteration,dqn,ddqn,drqn,saa";
  std::size_t n_seeds = 10;
  auto* cmp_cmd = app.add_subcommand("compare", "Run several algorithms over seeds 0..n-1 and tabulate");
  add_common(cmp_cmd, cmp_opts, false);
  cmp_cmd->add_option("--algorithms", algorithms, "Comma-separated algorithm list");
  cmp_cmd->add_option("--seeds", n_seeds, "Number of seeds")->check(CLI::PositiveNumber);

  CommonOptions cfg_opts;
  auto* cfg_cmd = app.add_subcommand("config", "Print the resolved configuration as JSON");
  add_common(cfg_cmd, cfg_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*run_cmd) {
    const auto cfg = resolve(run_opts, run_cmd->remaining());
    const auto result = cradar::harness::run_experiment(cfg);
    cradar::harness::write_outputs(cfg, result);
    print_run(result);
  } else if (*cmp_cmd) {
    const auto base = resolve(cmp_opts, cmp_cmd->remaining());
    std::vector<cradar::harness::ExperimentConfig> configs;
    const auto names = split_csv(algorithms);
    if (names.empty()) throw Error(ErrorKind::InvalidConfig, "--algorithms is empty");
    for (const auto& name : names) {
      for (std::size_t s = 0; s < n_seeds; ++s) {
        auto ov = parse_overrides(cmp_cmd->remaining());
        if (!cmp_opts.scale.empty()) ov.emplace_back("scale", cmp_opts.scale);
        ov.emplace_back("algorithm", name);
        ov.emplace_back("seed", std::to_string(s));
        ov.emplace_back("output_dir", (base.output_dir / (name + "_seed" + std::to_string(s))).string());
        configs.push_back(cradar::harness::load_config(cmp_opts.config, ov));
      }
    }
    std::vector<cradar::harness::ExperimentResult> results;
    const auto rows = cradar::harness::compare_algorithms(configs, &results);
    for (std::size_t i = 0; i < configs.size(); ++i) {
      cradar::harness::write_outputs(configs[i], results[i]);
      print_run(results[i]);
    }
    cradar::harness::write_comparison_csv(rows, base.output_dir / "compare.csv");
    std::cout << "wrote " << (base.output_dir / "compare.csv").string() << '\n';
  } else if (*cfg_cmd) {
    std::cout << cradar::harness::to_json(resolve(cfg_opts, cfg_cmd->remaining())).dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    nlohmann::json line{{"kind", cradar::to_string(e.kind())}, {"message", e.what()}};
    std::cerr << "error: " << line.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json line{{"kind", "internal"}, {"message", e.what()}};
    std::cerr << "error: " << line.dump() << '\n';
    return 1;
  }
}
