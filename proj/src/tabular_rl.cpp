#include "cradar/tabular_rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "cradar/error.hpp"

namespace cradar::tabular {
namespace {

void check_solver_args(double gamma, double tol) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorKind::InvalidConfig, "gamma must lie in [0, 1)");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "tol must be > 0");
}

double backup(std::span<const Outcome> outcomes, const std::vector<double>& v, double gamma) {
  double q = 0.0;
  for (const auto& o : outcomes) q += o.probability * (o.mean_reward + gamma * v[o.next_state]);
  return q;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

MdpModel::MdpModel(StateIndex n_states, std::size_t n_actions) : n_states_(n_states), n_actions_(n_actions) {
  if (n_states == 0 || n_actions == 0) throw Error(ErrorKind::InvalidConfig, "model needs states and actions");
}

void MdpModel::check(StateIndex s, ActionIndex a) const {
  if (s >= n_states_) throw Error(ErrorKind::Range, "state " + std::to_string(s) + " out of range");
  if (a >= n_actions_) throw Error(ErrorKind::Range, "action " + std::to_string(a) + " out of range");
}

void MdpModel::set_outcomes(StateIndex s, ActionIndex a, std::vector<Outcome> outcomes) {
  check(s, a);
  if (outcomes.empty()) throw Error(ErrorKind::EmptyModel, "no outcomes for state-action pair");
  double total = 0.0;
  for (const auto& o : outcomes) {
    check(o.next_state, 0);
    if (o.probability < 0.0 || o.probability > 1.0) throw Error(ErrorKind::Range, "probability outside [0, 1]");
    total += o.probability;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::Numeric, "outcome probabilities do not sum to 1");
  auto [it, inserted] = table_.insert_or_assign(key(s, a), std::move(outcomes));
  (void)it;
  if (inserted) {
    auto& acts = actions_[s];
    acts.insert(std::lower_bound(acts.begin(), acts.end(), a), a);
  }
}

bool MdpModel::visited(StateIndex s, ActionIndex a) const { return table_.count(key(s, a)) != 0; }

std::span<const Outcome> MdpModel::outcomes(StateIndex s, ActionIndex a) const {
  auto it = table_.find(key(s, a));
  if (it == table_.end()) return {};
  return it->second;
}

std::span<const ActionIndex> MdpModel::actions_of(StateIndex s) const {
  auto it = actions_.find(s);
  if (it == actions_.end()) return {};
  return it->second;
}

double MdpModel::probability(StateIndex s, ActionIndex a, StateIndex next) const {
  for (const auto& o : outcomes(s, a)) {
    if (o.next_state == next) return o.probability;
  }
  return 0.0;
}

double MdpModel::reward(StateIndex s, ActionIndex a, StateIndex next) const {
  for (const auto& o : outcomes(s, a)) {
    if (o.next_state == next) return o.mean_reward;
  }
  return 0.0;
}

std::uint64_t MdpModel::visits(StateIndex s, ActionIndex a) const {
  std::uint64_t n = 0;
  for (const auto& o : outcomes(s, a)) n += o.count;
  return n;
}

MdpModel estimate_model(std::span<const Sample> samples, StateIndex n_states, std::size_t n_actions) {
  if (samples.empty()) throw Error(ErrorKind::EmptyModel, "cannot estimate a model from zero transitions");
  MdpModel model(n_states, n_actions);

  struct Acc {
    std::uint64_t count = 0;
    double reward_sum = 0.0;
  };
  // Ordered so that outcome lists come out sorted by successor state.
  std::map<std::pair<std::uint64_t, StateIndex>, Acc> triples;
  std::unordered_map<std::uint64_t, std::uint64_t> pair_counts;
  for (const auto& smp : samples) {
    model.check(smp.state, smp.action);
    model.check(smp.next_state, 0);
    const auto k = model.key(smp.state, smp.action);
    auto& acc = triples[{k, smp.next_state}];
    ++acc.count;
    acc.reward_sum += smp.reward;
    ++pair_counts[k];
  }
  for (const auto& [kk, acc] : triples) {
    const auto total = pair_counts.at(kk.first);
    model.table_[kk.first].push_back(Outcome{kk.second, static_cast<double>(acc.count) / static_cast<double>(total),
                                             acc.reward_sum / static_cast<double>(acc.count), acc.count});
  }
  for (const auto& [k, outs] : model.table_) {
    (void)outs;
    auto& acts = model.actions_[k / n_actions];
    acts.push_back(k % n_actions);
  }
  for (auto& [s, acts] : model.actions_) std::sort(acts.begin(), acts.end());
  return model;
}

ValueFunction policy_evaluation(const Policy& policy, const MdpModel& model, double gamma, double tol) {
  check_solver_args(gamma, tol);
  if (policy.n_states() != model.n_states()) throw Error(ErrorKind::Dimension, "policy/model state count mismatch");
  std::vector<double> v(model.n_states(), 0.0), next(model.n_states(), 0.0);
  for (std::size_t iter = 0;; ++iter) {
    for (StateIndex s = 0; s < model.n_states(); ++s) {
      next[s] = backup(model.outcomes(s, policy.action_of[s]), v, gamma);
    }
    const double delta = max_abs_diff(next, v);
    v.swap(next);
    if (delta < tol) break;
    if (!std::isfinite(delta)) throw Error(ErrorKind::Numeric, "policy evaluation diverged");
  }
  return ValueFunction{std::move(v)};
}

Policy policy_improvement(const ValueFunction& v, const MdpModel& model, double gamma,
                          ActionIndex fallback_action) {
  Policy pi;
  pi.n_actions = model.n_actions();
  pi.action_of.assign(model.n_states(), fallback_action);
  for (StateIndex s = 0; s < model.n_states(); ++s) {
    const auto acts = model.actions_of(s);
    if (acts.empty()) continue;
    double best = -INFINITY;
    std::vector<double> q(acts.size());
    for (std::size_t i = 0; i < acts.size(); ++i) {
      q[i] = backup(model.outcomes(s, acts[i]), v.v, gamma);
      best = std::max(best, q[i]);
    }
    // Values within rounding of the best count as ties.
    const double slack = 1e-12 * std::max(1.0, std::abs(best));
    for (std::size_t i = 0; i < acts.size(); ++i) {
      if (q[i] >= best - slack) {
        pi.action_of[s] = acts[i];
        break;
      }
    }
  }
  return pi;
}

PolicyIterationResult policy_iteration(const MdpModel& model, const SolverConfig& cfg) {
  check_solver_args(cfg.gamma, cfg.tol);
  if (cfg.fallback_action >= model.n_actions()) throw Error(ErrorKind::Range, "fallback action out of range");
  PolicyIterationResult out;
  out.policy.n_actions = model.n_actions();
  out.policy.action_of.assign(model.n_states(), cfg.fallback_action);
  for (StateIndex s = 0; s < model.n_states(); ++s) {
    const auto acts = model.actions_of(s);
    if (!acts.empty()) out.policy.action_of[s] = acts.front();
  }
  out.value = policy_evaluation(out.policy, model, cfg.gamma, cfg.tol);
  while (out.iterations < cfg.max_iters) {
    Policy improved = policy_improvement(out.value, model, cfg.gamma, cfg.fallback_action);
    ++out.iterations;
    if (improved == out.policy) {
      out.converged = true;
      break;
    }
    out.policy = std::move(improved);
    out.value = policy_evaluation(out.policy, model, cfg.gamma, cfg.tol);
  }
  return out;
}

ValueFunction value_iteration_oracle(const MdpModel& model, double gamma, double tol) {
  check_solver_args(gamma, tol);
  std::vector<double> v(model.n_states(), 0.0), next(model.n_states(), 0.0);
  for (;;) {
    for (StateIndex s = 0; s < model.n_states(); ++s) {
      const auto acts = model.actions_of(s);
      double best = acts.empty() ? 0.0 : -INFINITY;
      for (auto a : acts) best = std::max(best, backup(model.outcomes(s, a), v, gamma));
      next[s] = best;
    }
    const double delta = max_abs_diff(next, v);
    v.swap(next);
    if (delta < tol) break;
    if (!std::isfinite(delta)) throw Error(ErrorKind::Numeric, "value iteration diverged");
  }
  return ValueFunction{std::move(v)};
}

void write_policy_csv(const Policy& policy, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "state,action\n";
  for (std::size_t s = 0; s < policy.action_of.size(); ++s) out << s << ',' << policy.action_of[s] << '\n';
}

void write_value_csv(const ValueFunction& value, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.precision(17);
  out << "state,value\n";
  for (std::size_t s = 0; s < value.v.size(); ++s) out << s << ',' << value.v[s] << '\n';
}

}  // namespace cradar::tabular
