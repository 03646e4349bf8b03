#include "cradar/neural.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "cradar/error.hpp"
#include "cradar/simd.hpp"

namespace cradar::nn {
namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
    case Activation::Identity: return z;
  }
  return z;
}

// Derivative expressed through the pre-activation z and output y.
double activate_grad(Activation a, double z, double y) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// y = W x (+ y if accumulate), W rows x cols row-major.
void matvec(const std::vector<double>& w, std::size_t rows, std::size_t cols, std::span<const double> x,
            std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += simd::dot({w.data() + r * cols, cols}, x);
}

// dx += W^T dz
void matvec_t(const std::vector<double>& w, std::size_t rows, std::size_t cols, std::span<const double> dz,
              std::span<double> dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (dz[r] != 0.0) simd::axpy(dz[r], {w.data() + r * cols, cols}, dx);
  }
}

// dW += dz x^T
void outer_acc(std::vector<double>& dw, std::size_t rows, std::size_t cols, std::span<const double> dz,
               std::span<const double> x) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (dz[r] != 0.0) simd::axpy(dz[r], x, {dw.data() + r * cols, cols});
  }
}

struct LayerCache {
  std::vector<double> x;
  // dense
  std::vector<double> z, a;
  // lstm
  std::vector<double> h_prev, c_prev, gates, c, tanh_c, h;
};

using StepCache = std::vector<LayerCache>;

std::size_t lstm_layer_index(const QNetworkParams& p) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    if (p.layers[i].kind == LayerKind::Lstm) return i;
  }
  return p.layers.size();
}

// One forward step through every layer. `state` is read and overwritten.
std::vector<double> run_step(const QNetworkParams& p, std::span<const double> input, RecurrentState& state,
                             StepCache* cache) {
  if (input.size() != p.spec.input_dim) {
    throw Error(ErrorKind::Dimension, "network input has " + std::to_string(input.size()) + " values, expected " +
                                          std::to_string(p.spec.input_dim));
  }
  if (cache) cache->assign(p.layers.size(), {});
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const auto& L = p.layers[li];
    if (L.kind == LayerKind::Dense) {
      std::vector<double> z(L.b);
      matvec(L.w, L.out, L.in, x, z);
      std::vector<double> a(L.out);
      for (std::size_t k = 0; k < L.out; ++k) a[k] = activate(L.activation, z[k]);
      if (cache) {
        auto& c = (*cache)[li];
        c.x = x;
        c.z = std::move(z);
        c.a = a;
      }
      x = std::move(a);
    } else {
      const std::size_t H = L.out;
      std::vector<double> z(L.b);
      matvec(L.w, 4 * H, L.in, x, z);
      matvec(L.u, 4 * H, H, state.h, z);
      std::vector<double> gates(4 * H), c(H), tc(H), h(H);
      for (std::size_t k = 0; k < H; ++k) {
        gates[k] = sigmoid(z[k]);
        gates[H + k] = sigmoid(z[H + k]);
        gates[2 * H + k] = sigmoid(z[2 * H + k]);
        gates[3 * H + k] = std::tanh(z[3 * H + k]);
        c[k] = gates[H + k] * state.c[k] + gates[k] * gates[3 * H + k];
        tc[k] = std::tanh(c[k]);
        h[k] = gates[2 * H + k] * tc[k];
      }
      if (cache) {
        auto& cc = (*cache)[li];
        cc.x = x;
        cc.h_prev = state.h;
        cc.c_prev = state.c;
        cc.gates = std::move(gates);
        cc.c = c;
        cc.tanh_c = std::move(tc);
        cc.h = h;
      }
      state.h = h;
      state.c = std::move(c);
      x = std::move(h);
    }
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Numeric, "network produced a non-finite q-value");
  }
  return x;
}

void check_batch(const QNetworkParams& p, const Batch& batch) {
  if (batch.n_steps() == 0) throw Error(ErrorKind::Dimension, "empty training batch");
  for (const auto& seq : batch.sequences) {
    for (const auto& st : seq) {
      if (st.input.size() != p.spec.input_dim) throw Error(ErrorKind::Dimension, "batch input width mismatch");
      if (st.action >= p.spec.output_dim) throw Error(ErrorKind::Dimension, "batch action index out of range");
    }
  }
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw Error(ErrorKind::InvalidConfig, "network dims must be >= 1");
  std::size_t n_lstm = 0;
  for (const auto& l : hidden) {
    if (l.width == 0) throw Error(ErrorKind::InvalidConfig, "layer width must be >= 1");
    if (l.kind == LayerKind::Lstm) {
      ++n_lstm;
      if (l.activation != Activation::Tanh) throw Error(ErrorKind::InvalidConfig, "lstm layers use tanh output");
    }
  }
  if (n_lstm > 1) throw Error(ErrorKind::InvalidConfig, "at most one lstm layer is supported");
}

bool NetworkSpec::recurrent() const {
  return std::any_of(hidden.begin(), hidden.end(), [](const LayerSpec& l) { return l.kind == LayerKind::Lstm; });
}

NetworkSpec NetworkSpec::dense_q(std::size_t input_dim, std::size_t output_dim, std::size_t width) {
  return {input_dim, {{LayerKind::Dense, width, Activation::Relu}, {LayerKind::Dense, width, Activation::Relu}},
          output_dim};
}

NetworkSpec NetworkSpec::recurrent_q(std::size_t input_dim, std::size_t output_dim, std::size_t width) {
  return {input_dim, {{LayerKind::Dense, width, Activation::Relu}, {LayerKind::Lstm, width, Activation::Tanh}},
          output_dim};
}

std::size_t QNetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.u.size() + l.b.size();
  return n;
}

std::vector<std::span<double>> QNetworkParams::blocks() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.w);
    if (!l.u.empty()) out.emplace_back(l.u);
    out.emplace_back(l.b);
  }
  return out;
}

std::vector<std::span<const double>> QNetworkParams::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.w);
    if (!l.u.empty()) out.emplace_back(l.u);
    out.emplace_back(l.b);
  }
  return out;
}

bool QNetworkParams::all_finite() const {
  for (auto blk : blocks()) {
    for (double v : blk) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::size_t Batch::n_steps() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

QNetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  auto fill = [&](std::vector<double>& v, std::size_t n, double fan_in, double fan_out) {
    const double r = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-r, r);
    v.resize(n);
    for (auto& x : v) x = dist(rng);
  };
  QNetworkParams p;
  p.spec = spec;
  std::size_t in = spec.input_dim;
  auto layer_specs = spec.hidden;
  layer_specs.push_back({LayerKind::Dense, spec.output_dim, Activation::Identity});
  for (const auto& ls : layer_specs) {
    LayerParams L;
    L.kind = ls.kind;
    L.activation = ls.activation;
    L.in = in;
    L.out = ls.width;
    if (ls.kind == LayerKind::Dense) {
      fill(L.w, L.out * L.in, double(L.in), double(L.out));
      L.b.assign(L.out, 0.0);
    } else {
      fill(L.w, 4 * L.out * L.in, double(L.in), double(L.out));
      fill(L.u, 4 * L.out * L.out, double(L.out), double(L.out));
      L.b.assign(4 * L.out, 0.0);
    }
    p.layers.push_back(std::move(L));
    in = ls.width;
  }
  return p;
}

QNetworkParams zeros_like(const QNetworkParams& params) {
  QNetworkParams z = params;
  for (auto blk : z.blocks()) std::fill(blk.begin(), blk.end(), 0.0);
  return z;
}

QNetworkParams copy_params(const QNetworkParams& source) { return source; }

RecurrentState initial_state(const QNetworkParams& params) {
  RecurrentState s;
  const auto li = lstm_layer_index(params);
  if (li < params.layers.size()) {
    s.h.assign(params.layers[li].out, 0.0);
    s.c.assign(params.layers[li].out, 0.0);
  }
  return s;
}

ForwardResult forward(const QNetworkParams& params, std::span<const double> input, const RecurrentState* state) {
  const bool recurrent = lstm_layer_index(params) < params.layers.size();
  if (recurrent && (state == nullptr || state->empty())) {
    throw Error(ErrorKind::Dimension, "recurrent network requires a recurrent state");
  }
  if (!recurrent && state != nullptr && !state->empty()) {
    throw Error(ErrorKind::Dimension, "feed-forward network given a recurrent state");
  }
  ForwardResult out;
  if (recurrent) {
    out.state = *state;
    const auto& L = params.layers[lstm_layer_index(params)];
    if (out.state.h.size() != L.out || out.state.c.size() != L.out) {
      throw Error(ErrorKind::Dimension, "recurrent state width mismatch");
    }
  }
  out.q = run_step(params, input, out.state, nullptr);
  return out;
}

double loss(const QNetworkParams& params, const Batch& batch) {
  check_batch(params, batch);
  double total = 0.0;
  for (const auto& seq : batch.sequences) {
    RecurrentState st = initial_state(params);
    for (const auto& step : seq) {
      const auto q = run_step(params, step.input, st, nullptr);
      const double e = step.target - q[step.action];
      total += e * e;
    }
  }
  return total / static_cast<double>(batch.n_steps());
}

LossAndGradients backward(const QNetworkParams& params, const Batch& batch) {
  check_batch(params, batch);
  LossAndGradients out;
  out.gradients = zeros_like(params);
  auto& grads = out.gradients.layers;
  const double scale = 1.0 / static_cast<double>(batch.n_steps());
  const std::size_t lstm_li = lstm_layer_index(params);

  for (const auto& seq : batch.sequences) {
    std::vector<StepCache> caches(seq.size());
    std::vector<double> qa(seq.size());
    RecurrentState st = initial_state(params);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto q = run_step(params, seq[t].input, st, &caches[t]);
      qa[t] = q[seq[t].action];
      const double e = seq[t].target - qa[t];
      out.loss += e * e * scale;
    }

    std::vector<double> dh_next, dc_next;
    if (lstm_li < params.layers.size()) {
      dh_next.assign(params.layers[lstm_li].out, 0.0);
      dc_next.assign(params.layers[lstm_li].out, 0.0);
    }
    for (std::size_t t = seq.size(); t-- > 0;) {
      std::vector<double> d(params.spec.output_dim, 0.0);
      d[seq[t].action] = 2.0 * (qa[t] - seq[t].target) * scale;
      for (std::size_t li = params.layers.size(); li-- > 0;) {
        const auto& L = params.layers[li];
        auto& G = grads[li];
        const auto& c = caches[t][li];
        std::vector<double> dx(L.in, 0.0);
        if (L.kind == LayerKind::Dense) {
          std::vector<double> dz(L.out);
          for (std::size_t k = 0; k < L.out; ++k) dz[k] = d[k] * activate_grad(L.activation, c.z[k], c.a[k]);
          outer_acc(G.w, L.out, L.in, dz, c.x);
          simd::axpy(1.0, dz, G.b);
          if (li > 0) matvec_t(L.w, L.out, L.in, dz, dx);
        } else {
          const std::size_t H = L.out;
          std::vector<double> dz(4 * H), dc(H);
          for (std::size_t k = 0; k < H; ++k) {
            const double i = c.gates[k], f = c.gates[H + k], o = c.gates[2 * H + k], g = c.gates[3 * H + k];
            const double dh = d[k] + dh_next[k];
            dc[k] = dh * o * (1.0 - c.tanh_c[k] * c.tanh_c[k]) + dc_next[k];
            dz[k] = dc[k] * g * i * (1.0 - i);
            dz[H + k] = dc[k] * c.c_prev[k] * f * (1.0 - f);
            dz[2 * H + k] = dh * c.tanh_c[k] * o * (1.0 - o);
            dz[3 * H + k] = dc[k] * i * (1.0 - g * g);
          }
          outer_acc(G.w, 4 * H, L.in, dz, c.x);
          outer_acc(G.u, 4 * H, H, dz, c.h_prev);
          simd::axpy(1.0, dz, G.b);
          std::fill(dh_next.begin(), dh_next.end(), 0.0);
          matvec_t(L.u, 4 * H, H, dz, dh_next);
          for (std::size_t k = 0; k < H; ++k) dc_next[k] = dc[k] * c.gates[H + k];
          if (li > 0) matvec_t(L.w, 4 * H, L.in, dz, dx);
        }
        d = std::move(dx);
      }
    }
  }
  return out;
}

double gradient_norm(const Gradients& gradients) {
  double s = 0.0;
  for (auto blk : gradients.blocks()) s += simd::dot(blk, blk);
  return std::sqrt(s);
}

void sgd_step(QNetworkParams& params, const Gradients& gradients, const SgdConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning rate must be > 0");
  auto pb = params.blocks();
  const auto gb = gradients.blocks();
  if (pb.size() != gb.size()) throw Error(ErrorKind::Dimension, "gradient layout mismatch");
  double step = cfg.learning_rate;
  if (cfg.grad_clip > 0.0) {
    const double norm = gradient_norm(gradients);
    if (norm > cfg.grad_clip) step *= cfg.grad_clip / norm;
  }
  for (std::size_t i = 0; i < pb.size(); ++i) {
    if (pb[i].size() != gb[i].size()) throw Error(ErrorKind::Dimension, "gradient layout mismatch");
    simd::axpy(-step, gb[i], pb[i]);
  }
}

double check_gradients(const QNetworkParams& params, const Batch& batch, double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) throw Error(ErrorKind::InvalidConfig, "epsilon must lie in [1e-7, 1e-3]");
  const auto analytic = backward(params, batch).gradients;
  QNetworkParams probe = params;
  auto pb = probe.blocks();
  const auto gb = analytic.blocks();
  double worst = 0.0;
  for (std::size_t b = 0; b < pb.size(); ++b) {
    for (std::size_t k = 0; k < pb[b].size(); ++k) {
      const double saved = pb[b][k];
      pb[b][k] = saved + epsilon;
      const double up = loss(probe, batch);
      pb[b][k] = saved - epsilon;
      const double down = loss(probe, batch);
      pb[b][k] = saved;
      const double fd = (up - down) / (2.0 * epsilon);
      const double an = gb[b][k];
      const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

namespace {

const char* kind_name(LayerKind k) { return k == LayerKind::Dense ? "dense" : "lstm"; }

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

void write_array(std::ostream& out, const char* tag, std::size_t rows, std::size_t cols,
                 const std::vector<double>& v) {
  out << tag << ' ' << rows << ' ' << cols << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out << (c ? " " : "") << v[r * cols + c];
    out << '\n';
  }
}

std::vector<double> read_array(std::istream& in, const std::string& tag, std::size_t rows, std::size_t cols) {
  std::string got;
  std::size_t r = 0, c = 0;
  in >> got >> r >> c;
  if (!in || got != tag || r != rows || c != cols) {
    throw Error(ErrorKind::Io, "malformed parameter snapshot near '" + tag + "'");
  }
  std::vector<double> v(rows * cols);
  for (auto& x : v) in >> x;
  if (!in) throw Error(ErrorKind::Io, "truncated parameter snapshot");
  return v;
}

}  // namespace

void save_params(const QNetworkParams& params, std::ostream& out) {
  const auto old_prec = out.precision(17);
  out << "cradar-qnet 1\n";
  out << "input_dim " << params.spec.input_dim << "\noutput_dim " << params.spec.output_dim << '\n';
  out << "hidden " << params.spec.hidden.size() << '\n';
  for (const auto& l : params.spec.hidden) {
    out << kind_name(l.kind) << ' ' << l.width << ' ' << activation_name(l.activation) << '\n';
  }
  for (const auto& L : params.layers) {
    const std::size_t rows = L.kind == LayerKind::Dense ? L.out : 4 * L.out;
    write_array(out, "w", rows, L.in, L.w);
    if (L.kind == LayerKind::Lstm) write_array(out, "u", rows, L.out, L.u);
    write_array(out, "b", 1, rows, L.b);
  }
  out.precision(old_prec);
}

QNetworkParams load_params(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "cradar-qnet" || version != 1) throw Error(ErrorKind::Io, "not a cradar-qnet v1 snapshot");
  NetworkSpec spec;
  std::string key;
  std::size_t n_hidden = 0;
  in >> key >> spec.input_dim;
  in >> key >> spec.output_dim;
  in >> key >> n_hidden;
  for (std::size_t i = 0; i < n_hidden && in; ++i) {
    std::string kind, act;
    LayerSpec l;
    in >> kind >> l.width >> act;
    l.kind = kind == "lstm" ? LayerKind::Lstm : LayerKind::Dense;
    l.activation = act == "relu" ? Activation::Relu : act == "tanh" ? Activation::Tanh : Activation::Identity;
    spec.hidden.push_back(l);
  }
  if (!in) throw Error(ErrorKind::Io, "malformed snapshot header");
  QNetworkParams p = init_params(spec, 0);
  for (auto& L : p.layers) {
    const std::size_t rows = L.kind == LayerKind::Dense ? L.out : 4 * L.out;
    L.w = read_array(in, "w", rows, L.in);
    if (L.kind == LayerKind::Lstm) L.u = read_array(in, "u", rows, L.out);
    L.b = read_array(in, "b", 1, rows);
  }
  return p;
}

}  // namespace cradar::nn
