#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cradar/spectrum_env.hpp"
#include "cradar/tabular_rl.hpp"
#include "support.hpp"

using namespace cradar;
using namespace cradar::tabular;
using cradar::testing::error_kind;

namespace {

double max_norm_diff(const ValueFunction& a, const ValueFunction& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) d = std::max(d, std::abs(a.v[i] - b.v[i]));
  return d;
}

Policy constant_policy(std::size_t n_states, std::size_t n_actions, ActionIndex a) {
  return Policy{std::vector<ActionIndex>(n_states, a), n_actions};
}

}  // namespace

TEST_CASE("estimate_model counts frequencies and averages rewards") {
  std::vector<Sample> det(10, Sample{0, 0, 1.0, 1});
  const auto m1 = estimate_model(det, 3, 2);
  CHECK(m1.probability(0, 0, 1) == 1.0);
  CHECK(m1.visits(0, 0) == 10);
  CHECK_FALSE(m1.visited(0, 1));
  CHECK(m1.outcomes(2, 0).empty());

  std::vector<Sample> split;
  for (int i = 0; i < 6; ++i) split.push_back({0, 0, 0.0, 1});
  for (int i = 0; i < 4; ++i) split.push_back({0, 0, 0.0, 2});
  const auto m2 = estimate_model(split, 3, 1);
  CHECK(m2.probability(0, 0, 1) == doctest::Approx(0.6));
  CHECK(m2.probability(0, 0, 2) == doctest::Approx(0.4));

  const std::vector<Sample> rewards{{1, 0, 10.0, 2}, {1, 0, 20.0, 2}};
  CHECK(estimate_model(rewards, 3, 1).reward(1, 0, 2) == 15.0);

  CHECK(error_kind([] { estimate_model({}, 3, 1); }) == ErrorKind::EmptyModel);
  const std::vector<Sample> bad{{5, 0, 0.0, 0}};
  CHECK(error_kind([&] { estimate_model(bad, 3, 1); }) == ErrorKind::Range);
}

TEST_CASE("estimated probabilities are normalized") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> s(0, 15);
  std::uniform_int_distribution<std::size_t> a(0, 3);
  std::vector<Sample> log;
  for (int i = 0; i < 5000; ++i) log.push_back({s(rng), a(rng), static_cast<double>(i % 7), s(rng)});
  const auto m = estimate_model(log, 16, 4);
  for (StateIndex st = 0; st < 16; ++st) {
    for (ActionIndex ac = 0; ac < 4; ++ac) {
      double total = 0.0;
      for (const auto& o : m.outcomes(st, ac)) {
        CHECK(o.probability >= 0.0);
        CHECK(o.probability <= 1.0);
        total += o.probability;
      }
      if (m.visited(st, ac)) CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("set_outcomes validates distributions") {
  MdpModel m(2, 1);
  CHECK(error_kind([&] { m.set_outcomes(0, 0, {{1, 0.5, 0.0, 1}}); }) == ErrorKind::Numeric);
  CHECK(error_kind([&] { m.set_outcomes(0, 0, {}); }) == ErrorKind::EmptyModel);
  CHECK(error_kind([&] { m.set_outcomes(0, 3, {{1, 1.0, 0.0, 1}}); }) == ErrorKind::Range);
  CHECK(error_kind([] { MdpModel(0, 1); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("policy evaluation matches closed forms") {
  // Absorbing state with self-reward r: v = r / (1 - gamma).
  MdpModel absorbing(1, 1);
  absorbing.set_outcomes(0, 0, {{0, 1.0, 3.0, 1}});
  const auto v = policy_evaluation(constant_policy(1, 1, 0), absorbing, 0.9, 1e-12);
  CHECK(v.v[0] == doctest::Approx(30.0).epsilon(1e-9));

  // Two-state deterministic swap, rewards (1, 0), gamma 0.5:
  // v0 = 1 + 0.5 v1, v1 = 0 + 0.5 v0  =>  v0 = 4/3, v1 = 2/3.
  MdpModel chain(2, 1);
  chain.set_outcomes(0, 0, {{1, 1.0, 1.0, 1}});
  chain.set_outcomes(1, 0, {{0, 1.0, 0.0, 1}});
  const auto vc = policy_evaluation(constant_policy(2, 1, 0), chain, 0.5, 1e-13);
  CHECK(vc.v[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
  CHECK(vc.v[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-10));

  // gamma = 0: expected immediate reward.
  MdpModel branch(3, 1);
  branch.set_outcomes(0, 0, {{1, 0.25, 8.0, 1}, {2, 0.75, -4.0, 3}});
  const auto v0 = policy_evaluation(constant_policy(3, 1, 0), branch, 0.0, 1e-9);
  CHECK(v0.v[0] == doctest::Approx(-1.0));
  // Unvisited (s, pi(s)) evaluates to zero.
  CHECK(v0.v[1] == 0.0);

  CHECK(error_kind([&] { policy_evaluation(constant_policy(3, 1, 0), branch, 1.0, 1e-9); }) ==
        ErrorKind::InvalidConfig);
  CHECK(error_kind([&] { policy_evaluation(constant_policy(3, 1, 0), branch, 0.5, 0.0); }) ==
        ErrorKind::InvalidConfig);
}

TEST_CASE("policy improvement takes the best visited action, lowest index on ties") {
  MdpModel m(2, 3);
  m.set_outcomes(0, 1, {{1, 1.0, 5.0, 1}});
  m.set_outcomes(0, 2, {{1, 1.0, 7.0, 1}});
  m.set_outcomes(1, 0, {{1, 1.0, 0.0, 1}});
  m.set_outcomes(1, 2, {{1, 1.0, 0.0, 1}});
  const ValueFunction zero{{0.0, 0.0}};
  const auto pi = policy_improvement(zero, m, 0.9, 0);
  CHECK(pi.action_of[0] == 2);
  CHECK(pi.action_of[1] == 0);

  MdpModel single(2, 4);
  single.set_outcomes(0, 3, {{0, 1.0, -100.0, 1}});
  const auto ps = policy_improvement(zero, single, 0.9, 1);
  CHECK(ps.action_of[0] == 3);
  // No visited action: fallback.
  CHECK(ps.action_of[1] == 1);
}

TEST_CASE("policy iteration converges and agrees with the value-iteration oracle") {
  MdpModel one(4, 1);
  for (StateIndex s = 0; s < 4; ++s) one.set_outcomes(s, 0, {{(s + 1) % 4, 1.0, 1.0, 1}});
  const auto r1 = policy_iteration(one, SolverConfig{});
  CHECK(r1.converged);
  CHECK(r1.iterations == 1);

  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = cradar::testing::random_mdp(rng, 16, 4);
    SolverConfig cfg;
    cfg.gamma = trial % 2 ? 0.9 : 0.5;
    const auto r = policy_iteration(m, cfg);
    REQUIRE(r.converged);
    const auto oracle = value_iteration_oracle(m, cfg.gamma, cfg.tol);
    CHECK(max_norm_diff(r.value, oracle) < 10 * cfg.tol / (1 - cfg.gamma));
    // Greedy stability.
    CHECK(policy_improvement(r.value, m, cfg.gamma, cfg.fallback_action) == r.policy);
    // The oracle is also the evaluation of the optimal policy.
    CHECK(max_norm_diff(policy_evaluation(r.policy, m, cfg.gamma, cfg.tol), oracle) < 1e-6);
  }
}

TEST_CASE("policy iteration improves monotonically") {
  std::mt19937_64 rng(77);
  const double tol = 1e-9;
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = cradar::testing::random_mdp(rng, 32, 6);
    Policy pi = constant_policy(32, 6, 0);
    for (StateIndex s = 0; s < 32; ++s) {
      const auto acts = m.actions_of(s);
      if (!acts.empty()) pi.action_of[s] = acts.back();
    }
    auto v = policy_evaluation(pi, m, 0.9, tol);
    for (int round = 0; round < 50; ++round) {
      const auto next = policy_improvement(v, m, 0.9, 0);
      const auto vn = policy_evaluation(next, m, 0.9, tol);
      for (std::size_t s = 0; s < 32; ++s) CHECK(vn.v[s] >= v.v[s] - 10 * tol / (1 - 0.9));
      if (next == pi) break;
      pi = next;
      v = vn;
    }
  }
}

TEST_CASE("value-iteration oracle limits") {
  MdpModel m(2, 2);
  m.set_outcomes(0, 0, {{1, 1.0, 2.0, 1}});
  m.set_outcomes(0, 1, {{1, 0.5, 6.0, 1}, {0, 0.5, -2.0, 1}});
  m.set_outcomes(1, 0, {{1, 1.0, 1.0, 1}});
  const auto v0 = value_iteration_oracle(m, 0.0, 1e-12);
  CHECK(v0.v[0] == doctest::Approx(2.0));
  CHECK(v0.v[1] == doctest::Approx(1.0));
  const auto v9 = value_iteration_oracle(m, 0.9, 1e-12);
  CHECK(v9.v[1] == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("non-convergence is reported, not thrown") {
  std::mt19937_64 rng(9);
  const auto m = cradar::testing::random_mdp(rng, 32, 8);
  SolverConfig cfg;
  cfg.max_iters = 1;
  const auto r = policy_iteration(m, cfg);
  CHECK(r.iterations == 1);
  CHECK_FALSE(r.converged);
}

TEST_CASE("policy iteration on the static-occupancy MDP picks the open three bands") {
  env::EnvConfig cfg;
  env::SpectrumEnv env(cfg, env::TraceSource{{{0, 0, 0, 1, 1}}, true});
  env.reset();
  const auto actions = env::enumerate_actions(cfg.n_subbands);
  std::vector<Sample> log;
  for (int rep = 0; rep < 20; ++rep) {
    for (const auto& a : actions) {
      const auto r = env.step(a);
      log.push_back({r.transition.state.index, env::action_index(a, cfg.n_subbands), r.transition.reward,
                     r.transition.next_state.index});
    }
  }
  const auto model = estimate_model(log, env::count_states(cfg.n_subbands, cfg.history_depth), actions.size());
  SolverConfig sc;
  sc.fallback_action = cfg.n_subbands - 1;
  const auto r = policy_iteration(model, sc);
  const auto s = env.state().index;
  CHECK(actions[r.policy.action_of[s]] == env::RadarAction{0, 2});
}

TEST_CASE("policies and values export as CSV") {
  const auto dir = std::filesystem::temp_directory_path();
  write_policy_csv(Policy{{2, 0}, 3}, dir / "cradar_policy.csv");
  write_value_csv(ValueFunction{{1.5, -2.0}}, dir / "cradar_value.csv");
  std::ifstream p(dir / "cradar_policy.csv");
  std::string line;
  std::getline(p, line);
  CHECK(line == "state,action");
  std::getline(p, line);
  CHECK(line == "0,2");
  std::ifstream v(dir / "cradar_value.csv");
  std::getline(v, line);
  std::getline(v, line);
  CHECK(line == "0,1.5");
}
