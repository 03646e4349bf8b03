#pragma once

// Waveform-selection agents and the two-phase training protocol: offline
// learning from uniformly random (simulated, not transmitted) actions, then
// online operation where deep agents keep updating every n_online decisions.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "cradar/neural.hpp"
#include "cradar/spectrum_env.hpp"
#include "cradar/tabular_rl.hpp"

namespace cradar::agents {

enum class Algorithm { PolicyIteration, Dqn, Ddqn, Drqn, Saa, Random };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);
bool is_deep(Algorithm algorithm);

struct AgentConfig {
  Algorithm algorithm = Algorithm::Dqn;
  double gamma = 0.9;
  /// SGD updates between target-network refreshes.
  std::size_t target_update_period = 100;
  /// Decisions between SGD updates.
  std::size_t n_online = 10;
  std::size_t offline_epochs = 200;
  std::size_t online_epochs = 200;
  std::size_t steps_per_epoch = 101;
  std::size_t replay_capacity = 10000;
  std::size_t episode_length = 8;
  /// Exploration while learning online; pure evaluation runs use 0.
  double online_epsilon = 0.05;
  bool online_learning = true;
  std::size_t hidden_width = 64;
  nn::SgdConfig sgd;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_reward = 0.0;
  std::size_t collisions = 0;
  std::size_t subbands_used = 0;
  /// Decisions whose action differs from the previous decision.
  std::size_t adaptations = 0;
  std::size_t missed_opportunities = 0;
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(env::Transition transition);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// i-th oldest stored transition.
  const env::Transition& at(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::vector<env::Transition> items_;
  std::size_t cursor_ = 0;
};

/// Uniform without replacement; nullopt when fewer than batch_size are stored.
std::optional<std::vector<env::Transition>> sample_batch(const ReplayMemory& memory, std::size_t batch_size,
                                                         std::mt19937_64& rng);

using Episode = std::vector<env::Transition>;

/// FIFO store of fixed-length, temporally ordered episodes.
class EpisodeMemory {
 public:
  EpisodeMemory(std::size_t capacity, std::size_t episode_length);

  void push(Episode episode);
  std::size_t size() const { return episodes_.size(); }
  std::size_t episode_length() const { return length_; }
  const Episode& at(std::size_t i) const { return episodes_.at(i); }

 private:
  std::size_t capacity_;
  std::size_t length_;
  std::deque<Episode> episodes_;
};

std::optional<Episode> sample_episode(const EpisodeMemory& memory, std::mt19937_64& rng);

/// y = r + gamma * max_a' Q(s', a'; target)
double dqn_target(double reward, const env::InterferenceState& next_state, const nn::QNetworkParams& target,
                  double gamma);
/// y = r + gamma * Q(s', argmax_a Q(s', a; online); target)
double ddqn_target(double reward, const env::InterferenceState& next_state, const nn::QNetworkParams& online,
                   const nn::QNetworkParams& target, double gamma);

/// Lowest index among the maximal entries.
std::size_t argmax(std::span<const double> values);

/// Largest contiguous open block of `occupancy` (ties: lowest lo); band 0 alone when none is open.
env::RadarAction sense_and_avoid(const env::OccupancyVector& occupancy);

enum class Mode { Offline, Online };

class Agent {
 public:
  virtual ~Agent() = default;

  virtual Algorithm algorithm() const = 0;
  virtual env::RadarAction select_action(const env::InterferenceState& state, Mode mode) = 0;
  /// Records the outcome of the last selected action; deep agents may run an SGD update.
  virtual void observe(const env::Transition& transition, Mode mode) = 0;
  /// Called once after the offline phase.
  virtual void end_offline() {}
  /// Called whenever the environment is reset.
  virtual void begin_stream() {}
};

class SaaAgent final : public Agent {
 public:
  Algorithm algorithm() const override { return Algorithm::Saa; }
  env::RadarAction select_action(const env::InterferenceState& state, Mode mode) override;
  void observe(const env::Transition&, Mode) override {}
};

class RandomAgent final : public Agent {
 public:
  RandomAgent(std::size_t n_subbands, std::uint64_t seed);
  Algorithm algorithm() const override { return Algorithm::Random; }
  env::RadarAction select_action(const env::InterferenceState& state, Mode mode) override;
  void observe(const env::Transition&, Mode) override {}

 private:
  std::vector<env::RadarAction> actions_;
  std::mt19937_64 rng_;
};

class PolicyIterationAgent final : public Agent {
 public:
  PolicyIterationAgent(const env::EnvConfig& env_cfg, const AgentConfig& cfg);

  Algorithm algorithm() const override { return Algorithm::PolicyIteration; }
  env::RadarAction select_action(const env::InterferenceState& state, Mode mode) override;
  void observe(const env::Transition& transition, Mode mode) override;
  void end_offline() override;

  bool trained() const { return policy_.has_value(); }
  const tabular::Policy& policy() const { return policy_.value(); }
  const tabular::MdpModel& model() const { return model_.value(); }
  /// Online decisions made in states never visited during training.
  std::size_t unvisited_lookups() const { return unvisited_lookups_; }

 private:
  env::EnvConfig env_cfg_;
  AgentConfig cfg_;
  std::vector<env::RadarAction> actions_;
  std::mt19937_64 rng_;
  std::vector<tabular::Sample> log_;
  std::optional<tabular::MdpModel> model_;
  std::optional<tabular::Policy> policy_;
  std::size_t unvisited_lookups_ = 0;
};

/// DQN, DDQN (decoupled target) and DRQN (LSTM, episode replay).
class DeepQAgent final : public Agent {
 public:
  DeepQAgent(const env::EnvConfig& env_cfg, const AgentConfig& cfg);

  Algorithm algorithm() const override { return cfg_.algorithm; }
  env::RadarAction select_action(const env::InterferenceState& state, Mode mode) override;
  void observe(const env::Transition& transition, Mode mode) override;
  void begin_stream() override;

  /// Greedy q-values for `state` (feed-forward nets; DRQN uses a fresh recurrent state).
  std::vector<double> q_values(const env::InterferenceState& state) const;
  /// Runs one SGD update if enough experience is stored; returns whether it did.
  bool learn();

  const nn::QNetworkParams& online_params() const { return online_; }
  const nn::QNetworkParams& target_params() const { return target_; }
  nn::QNetworkParams& mutable_online_params() { return online_; }
  const ReplayMemory& replay() const { return replay_; }
  const EpisodeMemory& episodes() const { return episodes_; }
  std::size_t updates() const { return updates_; }
  void set_epsilon(double epsilon) { epsilon_ = epsilon; }
  double epsilon() const { return epsilon_; }

 private:
  bool recurrent() const { return cfg_.algorithm == Algorithm::Drqn; }
  nn::Batch build_feedforward_batch(const std::vector<env::Transition>& batch) const;
  nn::Batch build_episode_batch(const std::vector<Episode>& episodes) const;

  env::EnvConfig env_cfg_;
  AgentConfig cfg_;
  std::vector<env::RadarAction> actions_;
  std::mt19937_64 rng_;
  nn::QNetworkParams online_;
  nn::QNetworkParams target_;
  ReplayMemory replay_;
  EpisodeMemory episodes_;
  Episode pending_;
  nn::RecurrentState recurrent_state_;
  std::size_t steps_in_window_ = 0;
  std::size_t decisions_ = 0;
  std::size_t updates_ = 0;
  double epsilon_;
};

std::unique_ptr<Agent> make_agent(const env::EnvConfig& env_cfg, const AgentConfig& cfg);

/// Raw per-decision record of a run, used for sharing and detection scoring.
struct DecisionLog {
  std::vector<env::RadarAction> actions;
  std::vector<env::OccupancyVector> occupancy;
  std::vector<double> rewards;
};

std::vector<EpochStats> offline_train(Agent& agent, env::SpectrumEnv& env, const AgentConfig& cfg);
std::vector<EpochStats> online_evaluate(Agent& agent, env::SpectrumEnv& env, const AgentConfig& cfg,
                                        DecisionLog* log = nullptr);

}  // namespace cradar::agents
