#include "cradar/agents.hpp"

#include <algorithm>
#include <numeric>

#include "cradar/error.hpp"

namespace cradar::agents {
namespace {

std::size_t missed_opportunities(const env::RadarAction& a, const env::OccupancyVector& occ) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < occ.size(); ++i) n += (!occ.occupied(i) && !a.covers(i)) ? 1 : 0;
  return n;
}

std::vector<EpochStats> run_phase(Agent& agent, env::SpectrumEnv& env, std::size_t epochs, std::size_t steps,
                                  Mode mode, DecisionLog* log) {
  env.reset();
  agent.begin_stream();
  std::vector<EpochStats> stats;
  stats.reserve(epochs);
  std::optional<env::RadarAction> previous;
  for (std::size_t e = 0; e < epochs; ++e) {
    EpochStats st;
    st.epoch = e;
    double total = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const auto action = agent.select_action(env.state(), mode);
      const auto result = env.step(action);
      agent.observe(result.transition, mode);
      total += result.reward.total;
      st.collisions += result.reward.n_collisions;
      st.subbands_used += action.width();
      st.missed_opportunities += missed_opportunities(action, result.occupancy);
      if (previous && !(*previous == action)) ++st.adaptations;
      previous = action;
      if (log) {
        log->actions.push_back(action);
        log->occupancy.push_back(result.occupancy);
        log->rewards.push_back(result.reward.total);
      }
    }
    st.mean_reward = total / static_cast<double>(steps);
    stats.push_back(st);
  }
  return stats;
}

env::RadarAction uniform_action(const std::vector<env::RadarAction>& actions, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
  return actions[pick(rng)];
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::PolicyIteration: return "policy_iteration";
    case Algorithm::Dqn: return "dqn";
    case Algorithm::Ddqn: return "ddqn";
    case Algorithm::Drqn: return "drqn";
    case Algorithm::Saa: return "saa";
    case Algorithm::Random: return "random";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::PolicyIteration, Algorithm::Dqn, Algorithm::Ddqn, Algorithm::Drqn, Algorithm::Saa,
                 Algorithm::Random}) {
    if (to_string(a) == name) return a;
  }
  if (name == "pi" || name == "mdp_pi") return Algorithm::PolicyIteration;
  throw Error(ErrorKind::InvalidConfig, "unknown algorithm '" + std::string(name) + "'");
}

bool is_deep(Algorithm algorithm) {
  return algorithm == Algorithm::Dqn || algorithm == Algorithm::Ddqn || algorithm == Algorithm::Drqn;
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorKind::InvalidConfig, "agent gamma must lie in [0, 1)");
  if (target_update_period < 1 || n_online < 1 || steps_per_epoch < 1 || replay_capacity < 1 ||
      episode_length < 1 || hidden_width < 1 || sgd.batch_size < 1) {
    throw Error(ErrorKind::InvalidConfig, "agent periods, sizes and capacities must be >= 1");
  }
  if (!(online_epsilon >= 0.0 && online_epsilon <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "online_epsilon must lie in [0, 1]");
  }
  if (!(sgd.learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning rate must be > 0");
}

// -- replay ------------------------------------------------------------------

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorKind::InvalidConfig, "replay capacity must be >= 1");
}

void ReplayMemory::push(env::Transition transition) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(transition));
  } else {
    items_[cursor_] = std::move(transition);
    cursor_ = (cursor_ + 1) % capacity_;
  }
}

const env::Transition& ReplayMemory::at(std::size_t i) const {
  if (i >= items_.size()) throw Error(ErrorKind::Range, "replay index out of range");
  return items_[(cursor_ + i) % items_.size()];
}

std::optional<std::vector<env::Transition>> sample_batch(const ReplayMemory& memory, std::size_t batch_size,
                                                         std::mt19937_64& rng) {
  if (batch_size == 0 || memory.size() < batch_size) return std::nullopt;
  std::vector<std::size_t> idx(memory.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<env::Transition> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.push_back(memory.at(idx[i]));
  }
  return out;
}

EpisodeMemory::EpisodeMemory(std::size_t capacity, std::size_t episode_length)
    : capacity_(capacity), length_(episode_length) {
  if (capacity == 0 || episode_length == 0) throw Error(ErrorKind::InvalidConfig, "episode memory sizes must be >= 1");
}

void EpisodeMemory::push(Episode episode) {
  if (episode.size() != length_) {
    throw Error(ErrorKind::Dimension, "episode length " + std::to_string(episode.size()) + " != " +
                                          std::to_string(length_));
  }
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
}

std::optional<Episode> sample_episode(const EpisodeMemory& memory, std::mt19937_64& rng) {
  if (memory.size() == 0) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, memory.size() - 1);
  return memory.at(pick(rng));
}

// -- targets -------------------------------------------------------------------

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double dqn_target(double reward, const env::InterferenceState& next_state, const nn::QNetworkParams& target,
                  double gamma) {
  if (gamma == 0.0) return reward;
  const auto x = next_state.features();
  const auto q = nn::forward(target, x).q;
  return reward + gamma * *std::max_element(q.begin(), q.end());
}

double ddqn_target(double reward, const env::InterferenceState& next_state, const nn::QNetworkParams& online,
                   const nn::QNetworkParams& target, double gamma) {
  if (gamma == 0.0) return reward;
  const auto x = next_state.features();
  const auto q_online = nn::forward(online, x).q;
  const auto q_target = nn::forward(target, x).q;
  return reward + gamma * q_target[argmax(q_online)];
}

env::RadarAction sense_and_avoid(const env::OccupancyVector& occupancy) {
  env::RadarAction best{0, 0};
  std::size_t best_len = 0;
  std::size_t i = 0;
  while (i < occupancy.size()) {
    if (occupancy.occupied(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < occupancy.size() && !occupancy.occupied(j + 1)) ++j;
    if (j - i + 1 > best_len) {
      best_len = j - i + 1;
      best = {i, j};
    }
    i = j + 1;
  }
  return best;
}

// -- simple agents ---------------------------------------------------------------

env::RadarAction SaaAgent::select_action(const env::InterferenceState& state, Mode) {
  return sense_and_avoid(state.latest());
}

RandomAgent::RandomAgent(std::size_t n_subbands, std::uint64_t seed)
    : actions_(env::enumerate_actions(n_subbands)), rng_(seed) {}

env::RadarAction RandomAgent::select_action(const env::InterferenceState&, Mode) {
  return uniform_action(actions_, rng_);
}

PolicyIterationAgent::PolicyIterationAgent(const env::EnvConfig& env_cfg, const AgentConfig& cfg)
    : env_cfg_(env_cfg), cfg_(cfg), actions_(env::enumerate_actions(env_cfg.n_subbands)), rng_(cfg.seed) {
  (void)env::count_states(env_cfg.n_subbands, env_cfg.history_depth);
}

env::RadarAction PolicyIterationAgent::select_action(const env::InterferenceState& state, Mode mode) {
  if (mode == Mode::Offline || !policy_) return uniform_action(actions_, rng_);
  if (model_->actions_of(state.index).empty()) ++unvisited_lookups_;
  return actions_[policy_->action_of.at(state.index)];
}

void PolicyIterationAgent::observe(const env::Transition& t, Mode mode) {
  if (mode != Mode::Offline) return;
  log_.push_back({t.state.index, env::action_index(t.action, env_cfg_.n_subbands), t.reward, t.next_state.index});
}

void PolicyIterationAgent::end_offline() {
  const auto n_states = env::count_states(env_cfg_.n_subbands, env_cfg_.history_depth);
  model_ = tabular::estimate_model(log_, n_states, actions_.size());
  tabular::SolverConfig solver;
  solver.gamma = cfg_.gamma;
  solver.fallback_action = env::action_index({0, env_cfg_.n_subbands - 1}, env_cfg_.n_subbands);
  policy_ = tabular::policy_iteration(*model_, solver).policy;
}

// -- deep agents -------------------------------------------------------------------

DeepQAgent::DeepQAgent(const env::EnvConfig& env_cfg, const AgentConfig& cfg)
    : env_cfg_(env_cfg),
      cfg_(cfg),
      actions_(env::enumerate_actions(env_cfg.n_subbands)),
      rng_(cfg.seed),
      replay_(cfg.replay_capacity),
      episodes_(std::max<std::size_t>(1, cfg.replay_capacity / cfg.episode_length), cfg.episode_length),
      epsilon_(cfg.online_learning ? cfg.online_epsilon : 0.0) {
  if (!is_deep(cfg.algorithm)) throw Error(ErrorKind::InvalidConfig, "DeepQAgent needs dqn, ddqn or drqn");
  cfg_.validate();
  const std::size_t in = env_cfg.n_subbands * env_cfg.history_depth;
  const auto spec = recurrent() ? nn::NetworkSpec::recurrent_q(in, actions_.size(), cfg.hidden_width)
                                : nn::NetworkSpec::dense_q(in, actions_.size(), cfg.hidden_width);
  online_ = nn::init_params(spec, cfg.seed ^ 0x5DEECE66Dull);
  target_ = nn::copy_params(online_);
  begin_stream();
}

void DeepQAgent::begin_stream() {
  pending_.clear();
  steps_in_window_ = 0;
  recurrent_state_ = nn::initial_state(online_);
}

std::vector<double> DeepQAgent::q_values(const env::InterferenceState& state) const {
  const auto x = state.features();
  if (recurrent()) {
    const auto fresh = nn::initial_state(online_);
    return nn::forward(online_, x, &fresh).q;
  }
  return nn::forward(online_, x).q;
}

env::RadarAction DeepQAgent::select_action(const env::InterferenceState& state, Mode mode) {
  if (mode == Mode::Offline) return uniform_action(actions_, rng_);
  std::vector<double> q;
  if (recurrent()) {
    // The recurrent state restarts on the same non-overlapping windows that become replay episodes.
    if (steps_in_window_ == 0) recurrent_state_ = nn::initial_state(online_);
    auto r = nn::forward(online_, state.features(), &recurrent_state_);
    recurrent_state_ = std::move(r.state);
    q = std::move(r.q);
    steps_in_window_ = (steps_in_window_ + 1) % cfg_.episode_length;
  } else {
    q = nn::forward(online_, state.features()).q;
  }
  if (epsilon_ > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng_) < epsilon_) return uniform_action(actions_, rng_);
  }
  return actions_[argmax(q)];
}

void DeepQAgent::observe(const env::Transition& transition, Mode mode) {
  if (recurrent()) {
    pending_.push_back(transition);
    if (pending_.size() == cfg_.episode_length) {
      episodes_.push(std::move(pending_));
      pending_.clear();
    }
  } else {
    replay_.push(transition);
  }
  ++decisions_;
  const bool may_learn = mode == Mode::Offline || cfg_.online_learning;
  if (may_learn && decisions_ % cfg_.n_online == 0) learn();
}

nn::Batch DeepQAgent::build_feedforward_batch(const std::vector<env::Transition>& batch) const {
  nn::Batch b;
  b.sequences.reserve(batch.size());
  for (const auto& t : batch) {
    const double y = cfg_.algorithm == Algorithm::Ddqn ? ddqn_target(t.reward, t.next_state, online_, target_, cfg_.gamma)
                                                       : dqn_target(t.reward, t.next_state, target_, cfg_.gamma);
    b.sequences.push_back({nn::TrainStep{t.state.features(), env::action_index(t.action, env_cfg_.n_subbands), y}});
  }
  return b;
}

nn::Batch DeepQAgent::build_episode_batch(const std::vector<Episode>& episodes) const {
  nn::Batch b;
  for (const auto& ep : episodes) {
    std::vector<nn::TrainStep> seq;
    seq.reserve(ep.size());
    // Target net unrolled over the successor states of the episode.
    auto st = nn::initial_state(target_);
    for (const auto& t : ep) {
      auto r = nn::forward(target_, t.next_state.features(), &st);
      st = std::move(r.state);
      const double y = t.reward + cfg_.gamma * *std::max_element(r.q.begin(), r.q.end());
      seq.push_back({t.state.features(), env::action_index(t.action, env_cfg_.n_subbands), y});
    }
    b.sequences.push_back(std::move(seq));
  }
  return b;
}

bool DeepQAgent::learn() {
  nn::Batch batch;
  if (recurrent()) {
    if (episodes_.size() == 0) return false;
    const std::size_t n = std::max<std::size_t>(1, cfg_.sgd.batch_size / cfg_.episode_length);
    std::vector<Episode> eps;
    for (std::size_t i = 0; i < n; ++i) eps.push_back(*sample_episode(episodes_, rng_));
    batch = build_episode_batch(eps);
  } else {
    auto sample = sample_batch(replay_, cfg_.sgd.batch_size, rng_);
    if (!sample) return false;
    batch = build_feedforward_batch(*sample);
  }
  const auto lg = nn::backward(online_, batch);
  nn::sgd_step(online_, lg.gradients, cfg_.sgd);
  ++updates_;
  if (updates_ % cfg_.target_update_period == 0) target_ = nn::copy_params(online_);
  return true;
}

std::unique_ptr<Agent> make_agent(const env::EnvConfig& env_cfg, const AgentConfig& cfg) {
  cfg.validate();
  switch (cfg.algorithm) {
    case Algorithm::PolicyIteration: return std::make_unique<PolicyIterationAgent>(env_cfg, cfg);
    case Algorithm::Dqn:
    case Algorithm::Ddqn:
    case Algorithm::Drqn: return std::make_unique<DeepQAgent>(env_cfg, cfg);
    case Algorithm::Saa: return std::make_unique<SaaAgent>();
    case Algorithm::Random: return std::make_unique<RandomAgent>(env_cfg.n_subbands, cfg.seed);
  }
  throw Error(ErrorKind::InvalidConfig, "unknown algorithm");
}

std::vector<EpochStats> offline_train(Agent& agent, env::SpectrumEnv& env, const AgentConfig& cfg) {
  auto stats = run_phase(agent, env, cfg.offline_epochs, cfg.steps_per_epoch, Mode::Offline, nullptr);
  agent.end_offline();
  return stats;
}

std::vector<EpochStats> online_evaluate(Agent& agent, env::SpectrumEnv& env, const AgentConfig& cfg,
                                        DecisionLog* log) {
  return run_phase(agent, env, cfg.online_epochs, cfg.steps_per_epoch, Mode::Online, log);
}

}  // namespace cradar::agents
