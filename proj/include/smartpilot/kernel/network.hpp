#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smartpilot/errors.hpp"
#include "smartpilot/kernel/rng.hpp"
#include "smartpilot/kernel/tensor.hpp"

namespace smartpilot::kernel {

enum class LayerKind { dense, lstm, activation };
enum class Activation { relu, tanh, sigmoid, identity, softmax };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::lstm: return "lstm";
    case LayerKind::activation: return "activation";
  }
  return "?";
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "lstm") return LayerKind::lstm;
  if (s == "activation") return LayerKind::activation;
  throw InputError("unknown layer kind '" + s + "'");
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "identity") return Activation::identity;
  if (s == "softmax") return Activation::softmax;
  throw InputError("unknown activation '" + s + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::identity;
  bool trainable = true;
  // lstm only: emit every hidden state ([T x H]) instead of the last one ([H]).
  bool return_sequences = false;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline LayerSpec dense(std::size_t in, std::size_t out, Activation act = Activation::identity) {
  return {LayerKind::dense, in, out, act, true, false};
}

inline LayerSpec lstm(std::size_t in, std::size_t hidden, bool return_sequences = false) {
  return {LayerKind::lstm, in, hidden, Activation::identity, true, return_sequences};
}

inline LayerSpec activation(std::size_t dim, Activation act) {
  return {LayerKind::activation, dim, dim, act, true, false};
}

struct Layer {
  LayerSpec spec;
  Tensor weight;  // dense: [out x in]; lstm: [4H x (in + H)], gate order i, f, g, o
  Tensor bias;    // dense: [out]; lstm: [4H]

  bool has_params() const { return spec.kind != LayerKind::activation; }
  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Ordered stack of layers plus the seed that initialized it.
struct Network {
  std::vector<Layer> layers;
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().spec.input_dim; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().spec.output_dim; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  void set_trainable(bool trainable) {
    for (auto& l : layers) l.spec.trainable = trainable;
  }

  friend bool operator==(const Network&, const Network&) = default;
};

using ModelParams = Network;

inline void validate_specs(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw DimensionError("network: no layers");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.input_dim == 0 || s.output_dim == 0)
      throw DimensionError("layer " + std::to_string(i) + ": dimensions must be positive");
    if (s.kind == LayerKind::activation && s.input_dim != s.output_dim)
      throw DimensionError("layer " + std::to_string(i) + ": activation layer must preserve width");
    if (s.activation == Activation::softmax && i + 1 != specs.size())
      throw DimensionError("layer " + std::to_string(i) + ": softmax is only allowed on the final layer");
    if (i > 0 && specs[i - 1].output_dim != s.input_dim)
      throw DimensionError("layer " + std::to_string(i) + ": input_dim " + std::to_string(s.input_dim) +
                           " does not match previous output_dim " + std::to_string(specs[i - 1].output_dim));
  }
}

/// Glorot-uniform weights drawn from a per-layer counter stream, zero biases,
/// LSTM forget-gate bias 1.
inline Network make_network(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  validate_specs(specs);
  Network net;
  net.seed = seed;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    Layer layer{s, {}, {}};
    CounterRng rng(seed, "layer/" + std::to_string(i));
    if (s.kind == LayerKind::dense) {
      const double limit = std::sqrt(6.0 / static_cast<double>(s.input_dim + s.output_dim));
      layer.weight = Tensor({s.output_dim, s.input_dim});
      for (auto& w : layer.weight.values) w = rng.uniform(-limit, limit);
      layer.bias = Tensor({s.output_dim});
    } else if (s.kind == LayerKind::lstm) {
      const std::size_t h = s.output_dim;
      const std::size_t fan_in = s.input_dim + h;
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + 4 * h));
      layer.weight = Tensor({4 * h, fan_in});
      for (auto& w : layer.weight.values) w = rng.uniform(-limit, limit);
      layer.bias = Tensor({4 * h});
      for (std::size_t j = h; j < 2 * h; ++j) layer.bias[j] = 1.0;
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void activate(Activation act, std::span<const double> z, std::span<double> y) {
  switch (act) {
    case Activation::relu:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] > 0.0 ? z[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = std::tanh(z[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = sigmoid(z[i]);
      break;
    case Activation::identity:
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i];
      break;
    case Activation::softmax: {
      const double m = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) sum += (y[i] = std::exp(z[i] - m));
      for (std::size_t i = 0; i < z.size(); ++i) y[i] /= sum;
      break;
    }
  }
}

// dz from dy, given pre-activation z and activation output y (one row).
inline void activate_backward(Activation act, std::span<const double> z, std::span<const double> y,
                              std::span<const double> dy, std::span<double> dz) {
  switch (act) {
    case Activation::relu:
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = z[i] > 0.0 ? dy[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = dy[i] * (1.0 - y[i] * y[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = dy[i] * y[i] * (1.0 - y[i]);
      break;
    case Activation::identity:
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = dy[i];
      break;
    case Activation::softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) dot += y[i] * dy[i];
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] = y[i] * (dy[i] - dot);
      break;
    }
  }
}

inline void apply_activation(Activation act, const Tensor& z, Tensor& y) {
  y.shape = z.shape;
  y.values.resize(z.size());
  for (std::size_t r = 0; r < z.rows(); ++r) activate(act, z.row(r), y.row(r));
}

}  // namespace detail

/// Intermediate values of one forward pass, consumed by backward().
struct Tape {
  struct Entry {
    Tensor input;
    Tensor pre;     // pre-activation
    Tensor output;
    // lstm: per step activated gates [T x 4H], cells/hiddens [(T+1) x H]
    std::vector<double> gates, cells, hiddens;
    std::size_t steps = 0;
  };
  std::vector<Entry> entries;
};

namespace detail {

// Dot product with four independent partial sums so the compiler can
// pipeline (and vectorize) the reduction. Summation order is fixed.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline Tensor as_sequence(const Tensor& input, std::size_t in_dim, std::size_t layer_index) {
  if (input.last_dim() != in_dim || input.size() == 0)
    throw DimensionError("layer " + std::to_string(layer_index) + ": expected input width " +
                         std::to_string(in_dim) + ", got shape " + Tensor::shape_string(input.shape));
  return Tensor({input.size() / in_dim, in_dim}, input.values);
}

inline void forward_layer(const Layer& layer, std::size_t index, const Tensor& input, Tape::Entry& e) {
  const auto& s = layer.spec;
  e.input = input;
  if (input.last_dim() != s.input_dim || input.size() == 0)
    throw DimensionError("layer " + std::to_string(index) + ": expected input width " +
                         std::to_string(s.input_dim) + ", got shape " + Tensor::shape_string(input.shape));
  switch (s.kind) {
    case LayerKind::activation:
      e.pre = input;
      break;
    case LayerKind::dense: {
      auto shape = input.shape;
      shape.back() = s.output_dim;
      e.pre = Tensor(shape);
      const std::size_t in = s.input_dim;
      for (std::size_t r = 0; r < input.rows(); ++r) {
        const double* x = input.values.data() + r * in;
        double* z = e.pre.values.data() + r * s.output_dim;
        for (std::size_t o = 0; o < s.output_dim; ++o) {
          const double* w = layer.weight.values.data() + o * in;
          z[o] = layer.bias[o] + dot(w, x, in);
        }
      }
      break;
    }
    case LayerKind::lstm: {
      const Tensor seq = as_sequence(input, s.input_dim, index);
      const std::size_t steps = seq.shape[0];
      const std::size_t in = s.input_dim;
      const std::size_t h = s.output_dim;
      const std::size_t cols = in + h;
      e.steps = steps;
      e.gates.assign(steps * 4 * h, 0.0);
      e.cells.assign((steps + 1) * h, 0.0);
      e.hiddens.assign((steps + 1) * h, 0.0);
      std::vector<double> xh(cols);
      for (std::size_t t = 0; t < steps; ++t) {
        std::copy_n(seq.values.data() + t * in, in, xh.begin());
        std::copy_n(e.hiddens.data() + t * h, h, xh.begin() + static_cast<std::ptrdiff_t>(in));
        double* g = e.gates.data() + t * 4 * h;
        for (std::size_t k = 0; k < 4 * h; ++k) {
          const double* w = layer.weight.values.data() + k * cols;
          g[k] = layer.bias[k] + dot(w, xh.data(), cols);
        }
        for (std::size_t k = 0; k < h; ++k) {
          const double ig = sigmoid(g[k]);
          const double fg = sigmoid(g[h + k]);
          const double gg = std::tanh(g[2 * h + k]);
          const double og = sigmoid(g[3 * h + k]);
          g[k] = ig;
          g[h + k] = fg;
          g[2 * h + k] = gg;
          g[3 * h + k] = og;
          const double c = fg * e.cells[t * h + k] + ig * gg;
          e.cells[(t + 1) * h + k] = c;
          e.hiddens[(t + 1) * h + k] = og * std::tanh(c);
        }
      }
      if (s.return_sequences) {
        e.pre = Tensor({steps, h}, std::vector<double>(e.hiddens.begin() + static_cast<std::ptrdiff_t>(h),
                                                       e.hiddens.end()));
      } else {
        e.pre = Tensor({h}, std::vector<double>(e.hiddens.end() - static_cast<std::ptrdiff_t>(h),
                                                e.hiddens.end()));
      }
      break;
    }
  }
  apply_activation(s.activation, e.pre, e.output);
}

}  // namespace detail

/// Forward pass recording a tape for backward().
inline Tensor forward(const Network& net, const Tensor& input, Tape& tape) {
  tape.entries.resize(net.layers.size());
  const Tensor* current = &input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    detail::forward_layer(net.layers[i], i, *current, tape.entries[i]);
    current = &tape.entries[i].output;
  }
  return net.layers.empty() ? input : tape.entries.back().output;
}

inline Tensor forward(const Network& net, const Tensor& input) {
  Tape tape;
  return forward(net, input, tape);
}

struct ParamGrad {
  std::size_t layer = 0;
  Tensor weight;
  Tensor bias;
};

/// One entry per trainable parameterized layer; frozen layers get none.
struct GradientSet {
  std::vector<ParamGrad> entries;

  const ParamGrad* find(std::size_t layer) const {
    for (const auto& e : entries)
      if (e.layer == layer) return &e;
    return nullptr;
  }
  ParamGrad* find(std::size_t layer) {
    for (auto& e : entries)
      if (e.layer == layer) return &e;
    return nullptr;
  }

  void scale(double factor) {
    for (auto& e : entries) {
      for (auto& v : e.weight.values) v *= factor;
      for (auto& v : e.bias.values) v *= factor;
    }
  }

  bool all_finite() const {
    for (const auto& e : entries)
      if (!e.weight.all_finite() || !e.bias.all_finite()) return false;
    return true;
  }
};

inline GradientSet zero_gradients(const Network& net) {
  GradientSet g;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (l.has_params() && l.spec.trainable)
      g.entries.push_back({i, Tensor(l.weight.shape), Tensor(l.bias.shape)});
  }
  return g;
}

/// Backpropagates `grad_output` through the taped pass, accumulating parameter
/// gradients into `grads` (which must come from zero_gradients on the same
/// network). Returns the gradient with respect to the network input, or an
/// empty tensor when `need_input_grad` is false and no trainable layer remains
/// below.
inline Tensor backward(const Network& net, const Tape& tape, const Tensor& grad_output, GradientSet& grads,
                       bool need_input_grad = true) {
  std::size_t lowest_trainable = net.layers.size();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].has_params() && net.layers[i].spec.trainable) {
      lowest_trainable = i;
      break;
    }
  }
  Tensor grad = grad_output;
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    if (!need_input_grad && li < lowest_trainable) return {};
    const auto& layer = net.layers[li];
    const auto& s = layer.spec;
    const auto& e = tape.entries[li];
    if (grad.size() != e.output.size())
      throw DimensionError("layer " + std::to_string(li) + ": gradient shape mismatch");

    Tensor dpre(e.pre.shape);
    for (std::size_t r = 0; r < e.pre.rows(); ++r)
      detail::activate_backward(s.activation, e.pre.row(r), e.output.row(r), grad.row(r), dpre.row(r));

    ParamGrad* pg = (layer.has_params() && s.trainable) ? grads.find(li) : nullptr;
    Tensor dinput(e.input.shape);

    if (s.kind == LayerKind::activation) {
      dinput.values = std::move(dpre.values);
    } else if (s.kind == LayerKind::dense) {
      const std::size_t in = s.input_dim;
      const std::size_t out = s.output_dim;
      for (std::size_t r = 0; r < e.input.rows(); ++r) {
        const double* x = e.input.values.data() + r * in;
        const double* dz = dpre.values.data() + r * out;
        double* dx = dinput.values.data() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double d = dz[o];
          if (d == 0.0) continue;
          const double* w = layer.weight.values.data() + o * in;
          for (std::size_t i = 0; i < in; ++i) dx[i] += w[i] * d;
          if (pg) {
            double* dw = pg->weight.values.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) dw[i] += d * x[i];
            pg->bias[o] += d;
          }
        }
      }
    } else {
      const std::size_t in = s.input_dim;
      const std::size_t h = s.output_dim;
      const std::size_t cols = in + h;
      const std::size_t steps = e.steps;
      std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), da(4 * h), xh(cols), dxh(cols);
      for (std::size_t t = steps; t-- > 0;) {
        std::vector<double> dh(dh_next);
        if (s.return_sequences) {
          for (std::size_t k = 0; k < h; ++k) dh[k] += dpre[t * h + k];
        } else if (t + 1 == steps) {
          for (std::size_t k = 0; k < h; ++k) dh[k] += dpre[k];
        }
        const double* g = e.gates.data() + t * 4 * h;
        for (std::size_t k = 0; k < h; ++k) {
          const double ig = g[k], fg = g[h + k], gg = g[2 * h + k], og = g[3 * h + k];
          const double c = e.cells[(t + 1) * h + k];
          const double c_prev = e.cells[t * h + k];
          const double tc = std::tanh(c);
          const double dc = dh[k] * og * (1.0 - tc * tc) + dc_next[k];
          da[k] = dc * gg * ig * (1.0 - ig);
          da[h + k] = dc * c_prev * fg * (1.0 - fg);
          da[2 * h + k] = dc * ig * (1.0 - gg * gg);
          da[3 * h + k] = dh[k] * tc * og * (1.0 - og);
          dc_next[k] = dc * fg;
        }
        const double* x = e.input.values.data() + t * in;
        std::copy_n(x, in, xh.begin());
        std::copy_n(e.hiddens.data() + t * h, h, xh.begin() + static_cast<std::ptrdiff_t>(in));
        std::fill(dxh.begin(), dxh.end(), 0.0);
        for (std::size_t k = 0; k < 4 * h; ++k) {
          const double d = da[k];
          if (d == 0.0) continue;
          const double* w = layer.weight.values.data() + k * cols;
          for (std::size_t j = 0; j < cols; ++j) dxh[j] += w[j] * d;
          if (pg) {
            double* dw = pg->weight.values.data() + k * cols;
            for (std::size_t j = 0; j < cols; ++j) dw[j] += d * xh[j];
            pg->bias[k] += d;
          }
        }
        std::copy_n(dxh.begin(), in, dinput.values.data() + t * in);
        std::copy_n(dxh.begin() + static_cast<std::ptrdiff_t>(in), h, dh_next.begin());
      }
    }
    grad = std::move(dinput);
  }
  return grad;
}

}  // namespace smartpilot::kernel
