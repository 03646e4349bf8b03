#pragma once

// Frequentist MDP estimation from logged transitions and exact tabular
// solvers: policy evaluation, greedy improvement, policy iteration, plus a
// value-iteration fixed point used as an independent cross-check.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

namespace cradar::tabular {

using StateIndex = std::uint64_t;
using ActionIndex = std::size_t;

/// One logged step in index form.
struct Sample {
  StateIndex state = 0;
  ActionIndex action = 0;
  double reward = 0.0;
  StateIndex next_state = 0;
};

/// Estimated successor of a visited (s, a) pair: Gamma(s,a,s') and R(s,a,s').
struct Outcome {
  StateIndex next_state = 0;
  double probability = 0.0;
  double mean_reward = 0.0;
  std::uint64_t count = 0;
};

/// Sparse transition/reward model. Unvisited (s, a) pairs are absent.
class MdpModel {
 public:
  MdpModel(StateIndex n_states, std::size_t n_actions);

  StateIndex n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }

  /// Installs a hand-built distribution (probabilities must sum to 1).
  void set_outcomes(StateIndex s, ActionIndex a, std::vector<Outcome> outcomes);

  bool visited(StateIndex s, ActionIndex a) const;
  std::span<const Outcome> outcomes(StateIndex s, ActionIndex a) const;
  /// Visited actions of `s` in ascending order.
  std::span<const ActionIndex> actions_of(StateIndex s) const;
  std::size_t n_visited_pairs() const { return table_.size(); }
  double probability(StateIndex s, ActionIndex a, StateIndex next) const;
  double reward(StateIndex s, ActionIndex a, StateIndex next) const;
  std::uint64_t visits(StateIndex s, ActionIndex a) const;

 private:
  friend MdpModel estimate_model(std::span<const Sample>, StateIndex, std::size_t);
  std::uint64_t key(StateIndex s, ActionIndex a) const { return s * n_actions_ + a; }
  void check(StateIndex s, ActionIndex a) const;

  StateIndex n_states_;
  std::size_t n_actions_;
  std::unordered_map<std::uint64_t, std::vector<Outcome>> table_;
  std::unordered_map<StateIndex, std::vector<ActionIndex>> actions_;
};

struct Policy {
  std::vector<ActionIndex> action_of;
  std::size_t n_actions = 0;

  std::size_t n_states() const { return action_of.size(); }
  friend bool operator==(const Policy&, const Policy&) = default;
};

struct ValueFunction {
  std::vector<double> v;
};

struct SolverConfig {
  double gamma = 0.9;
  double tol = 1e-9;
  std::size_t max_iters = 1000;
  /// Action assigned to states with no visited action.
  ActionIndex fallback_action = 0;
};

struct PolicyIterationResult {
  Policy policy;
  ValueFunction value;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Gamma(s,a,s') = count(s,a,s')/count(s,a); R(s,a,s') = mean reward of the triple.
MdpModel estimate_model(std::span<const Sample> samples, StateIndex n_states, std::size_t n_actions);

ValueFunction policy_evaluation(const Policy& policy, const MdpModel& model, double gamma, double tol);

/// Greedy one-step lookahead over visited actions; ties go to the lowest index.
Policy policy_improvement(const ValueFunction& v, const MdpModel& model, double gamma,
                          ActionIndex fallback_action);

PolicyIterationResult policy_iteration(const MdpModel& model, const SolverConfig& cfg);

ValueFunction value_iteration_oracle(const MdpModel& model, double gamma, double tol);

void write_policy_csv(const Policy& policy, const std::filesystem::path& path);
void write_value_csv(const ValueFunction& value, const std::filesystem::path& path);

}  // namespace cradar::tabular
