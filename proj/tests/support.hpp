#pragma once

// Shared generators for the unit and acceptance tests.

#include <algorithm>
#include <random>
#include <vector>

#include "cradar/error.hpp"
#include "cradar/neural.hpp"
#include "cradar/tabular_rl.hpp"

namespace cradar::testing {

/// Random sparse MDP: each (s, a) is visited with probability 0.8 and has
/// 1-4 successors with random probabilities and rewards in [-50, 50].
inline tabular::MdpModel random_mdp(std::mt19937_64& rng, std::size_t n_states, std::size_t n_actions) {
  tabular::MdpModel model(n_states, n_actions);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> reward(-50.0, 50.0);
  std::uniform_int_distribution<std::size_t> n_succ(1, 4);
  std::uniform_int_distribution<std::uint64_t> state(0, n_states - 1);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      if (u01(rng) > 0.8) continue;
      std::vector<tabular::StateIndex> next;
      const auto k = n_succ(rng);
      while (next.size() < std::min<std::size_t>(k, n_states)) {
        const auto c = state(rng);
        if (std::find(next.begin(), next.end(), c) == next.end()) next.push_back(c);
      }
      std::vector<double> w(next.size());
      double total = 0.0;
      for (auto& x : w) total += (x = 0.05 + u01(rng));
      std::vector<tabular::Outcome> outs;
      double assigned = 0.0;
      for (std::size_t i = 0; i < next.size(); ++i) {
        const double p = i + 1 == next.size() ? 1.0 - assigned : w[i] / total;
        assigned += p;
        outs.push_back({next[i], p, reward(rng), 1});
      }
      model.set_outcomes(s, a, std::move(outs));
    }
  }
  return model;
}

struct NetworkCase {
  nn::QNetworkParams params;
  nn::Batch batch;
};

/// Random small network and batch. Recurrent cases put an LSTM after a dense
/// layer and replay 3-step sequences; targets are random so the loss is nonzero.
inline NetworkCase random_network_case(std::mt19937_64& rng, bool recurrent) {
  std::uniform_int_distribution<std::size_t> dim(2, 8);
  std::uniform_int_distribution<int> act(0, 2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nn::NetworkSpec spec;
  spec.input_dim = dim(rng);
  spec.output_dim = dim(rng);
  const nn::Activation acts[] = {nn::Activation::Relu, nn::Activation::Tanh, nn::Activation::Identity};
  if (recurrent) {
    spec.hidden = {{nn::LayerKind::Dense, dim(rng), nn::Activation::Tanh},
                   {nn::LayerKind::Lstm, dim(rng), nn::Activation::Tanh}};
  } else {
    const std::size_t depth = 1 + rng() % 2;
    for (std::size_t i = 0; i < depth; ++i) spec.hidden.push_back({nn::LayerKind::Dense, dim(rng), acts[act(rng)]});
  }
  NetworkCase c{nn::init_params(spec, rng()), {}};
  // Non-zero biases so that every parameter block carries gradient signal.
  for (auto& L : c.params.layers) {
    for (auto& b : L.b) b = 0.1 * u(rng);
  }
  const std::size_t n_seq = 4;
  const std::size_t len = recurrent ? 3 : 1;
  for (std::size_t s = 0; s < n_seq; ++s) {
    std::vector<nn::TrainStep> seq;
    for (std::size_t t = 0; t < len; ++t) {
      nn::TrainStep st;
      st.input.resize(spec.input_dim);
      for (auto& x : st.input) x = u(rng);
      st.action = rng() % spec.output_dim;
      st.target = 2.0 * u(rng);
      seq.push_back(std::move(st));
    }
    c.batch.sequences.push_back(std::move(seq));
  }
  return c;
}

template <typename Fn>
ErrorKind error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::logic_error("expected cradar::Error");
}

}  // namespace cradar::testing
