#pragma once

// Small dense/LSTM Q-network with hand-written backpropagation (through time
// for the recurrent layer), plain SGD, and a central-difference gradient
// checker. 64-bit floats throughout.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace cradar::nn {

enum class LayerKind { Dense, Lstm };
enum class Activation { Identity, Relu, Tanh };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t width = 0;
  Activation activation = Activation::Relu;
};

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<LayerSpec> hidden;
  std::size_t output_dim = 0;

  void validate() const;
  bool recurrent() const;

  /// input -> 64 relu -> 64 relu -> outputs
  static NetworkSpec dense_q(std::size_t input_dim, std::size_t output_dim, std::size_t width = 64);
  /// input -> 64 relu -> lstm 64 -> outputs
  static NetworkSpec recurrent_q(std::size_t input_dim, std::size_t output_dim, std::size_t width = 64);
};

/// Weights of one layer. Dense: w is out x in (row-major). LSTM: w is 4H x in,
/// u is 4H x H, b is 4H, gate blocks ordered input, forget, output, candidate.
struct LayerParams {
  LayerKind kind = LayerKind::Dense;
  Activation activation = Activation::Identity;
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;
  std::vector<double> u;
  std::vector<double> b;
};

struct QNetworkParams {
  NetworkSpec spec;
  std::vector<LayerParams> layers;

  std::size_t parameter_count() const;
  /// Every weight/bias array in layer order (w, u, b per layer).
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  bool all_finite() const;
};

/// Gradients share the parameter layout.
using Gradients = QNetworkParams;

/// Hidden and cell state of the (single) LSTM layer; empty for feed-forward nets.
struct RecurrentState {
  std::vector<double> h;
  std::vector<double> c;

  bool empty() const { return h.empty(); }
};

struct SgdConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  /// Global L2-norm clip applied before the step; <= 0 disables clipping.
  double grad_clip = 0.0;
};

struct ForwardResult {
  std::vector<double> q;
  RecurrentState state;
};

/// One supervised step: the network input, the action whose output is
/// regressed, and the regression target y.
struct TrainStep {
  std::vector<double> input;
  std::size_t action = 0;
  double target = 0.0;
};

/// A batch is a list of sequences replayed forward in time from a zero
/// recurrent state. Feed-forward samples are sequences of length one.
struct Batch {
  std::vector<std::vector<TrainStep>> sequences;

  std::size_t n_steps() const;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

/// Glorot-uniform weights, zero biases.
QNetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);
QNetworkParams zeros_like(const QNetworkParams& params);
QNetworkParams copy_params(const QNetworkParams& source);
RecurrentState initial_state(const QNetworkParams& params);

/// One step. `state` is required iff the network has an LSTM layer.
ForwardResult forward(const QNetworkParams& params, std::span<const double> input,
                      const RecurrentState* state = nullptr);

/// Mean over all batch steps of (y - Q(s, a))^2.
double loss(const QNetworkParams& params, const Batch& batch);
LossAndGradients backward(const QNetworkParams& params, const Batch& batch);

/// params -= learning_rate * gradients (after optional norm clipping).
void sgd_step(QNetworkParams& params, const Gradients& gradients, const SgdConfig& cfg);
double gradient_norm(const Gradients& gradients);

/// Largest |g_an - g_fd| / max(|g_an|, |g_fd|, 1e-8) over every parameter.
double check_gradients(const QNetworkParams& params, const Batch& batch, double epsilon);

/// Text snapshot: shape header per array, then row-major values at full precision.
void save_params(const QNetworkParams& params, std::ostream& out);
QNetworkParams load_params(std::istream& in);

}  // namespace cradar::nn
