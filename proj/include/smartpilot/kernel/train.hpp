#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "smartpilot/errors.hpp"
#include "smartpilot/kernel/loss.hpp"
#include "smartpilot/kernel/network.hpp"
#include "smartpilot/kernel/rng.hpp"

namespace smartpilot::kernel {

enum class OptimizerKind { sgd, adam };

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::map<std::string, double> loss_weights;
  std::uint64_t seed = 0;  // drives shuffling

  double weight(const std::string& name, double fallback) const {
    auto it = loss_weights.find(name);
    return it == loss_weights.end() ? fallback : it->second;
  }

  // epochs == 0 is accepted and means "return the initialization".
  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be a finite non-negative number");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
  }
};

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) or plain SGD. Keeps moment state per
/// gradient entry; layers without an entry are never touched.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  void step(Network& net, const GradientSet& grads) {
    ++t_;
    for (const auto& g : grads.entries) {
      auto& layer = net.layers[g.layer];
      if (!layer.spec.trainable) continue;
      update(layer.weight.values, g.weight.values, state_for(g.layer, 0, g.weight.size()));
      update(layer.bias.values, g.bias.values, state_for(g.layer, 1, g.bias.size()));
    }
  }

  double learning_rate() const { return lr_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };

  Moments& state_for(std::size_t layer, int which, std::size_t n) {
    auto& s = state_[{layer, which}];
    if (s.m.size() != n) {
      s.m.assign(n, 0.0);
      s.v.assign(n, 0.0);
    }
    return s;
  }

  void update(std::vector<double>& params, const std::vector<double>& grad, Moments& s) {
    if (kind_ == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
      return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * grad[i];
      s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps);
    }
  }

  OptimizerKind kind_;
  double lr_;
  std::uint64_t t_ = 0;
  std::map<std::pair<std::size_t, int>, Moments> state_;
};

struct Sample {
  Tensor input;
  Tensor target;
};

/// Loss and parameter gradients for one sample.
inline std::pair<double, GradientSet> gradients(const Network& net, const Tensor& input, const Tensor& target,
                                                const LossSpec& loss) {
  Tape tape;
  const Tensor out = forward(net, input, tape);
  const LossValue lv = evaluate_loss(loss, out, target);
  GradientSet grads = zero_gradients(net);
  backward(net, tape, lv.grad, grads, false);
  if (!grads.all_finite()) throw NumericError("gradients are not finite (loss " + std::to_string(lv.value) + ")");
  return {lv.value, std::move(grads)};
}

inline void accumulate(GradientSet& into, const GradientSet& from) {
  for (std::size_t i = 0; i < into.entries.size(); ++i) {
    auto& a = into.entries[i];
    const auto& b = from.entries[i];
    for (std::size_t k = 0; k < a.weight.size(); ++k) a.weight[k] += b.weight[k];
    for (std::size_t k = 0; k < a.bias.size(); ++k) a.bias[k] += b.bias[k];
  }
}

struct TrainResult {
  Network model;
  std::vector<double> loss_history;  // mean loss per epoch
};

inline double mean_loss(const Network& net, std::span<const Sample> data, const LossSpec& loss) {
  double total = 0.0;
  for (const auto& s : data) total += evaluate_loss(loss, forward(net, s.input), s.target).value;
  return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

/// Mini-batch training with a per-epoch shuffle drawn from config.seed.
inline TrainResult train(Network model, std::span<const Sample> data, const TrainConfig& config,
                         const LossSpec& loss) {
  if (data.empty()) throw InputError("train: empty dataset");
  config.validate();
  Optimizer opt(config.optimizer, config.learning_rate);
  TrainResult result;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(config.seed, "train/shuffle/" + std::to_string(epoch));
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      GradientSet batch = zero_gradients(model);
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data[order[i]];
        Tape tape;
        const Tensor out = forward(model, s.input, tape);
        const LossValue lv = evaluate_loss(loss, out, s.target);
        epoch_loss += lv.value;
        backward(model, tape, lv.grad, batch, false);
      }
      batch.scale(1.0 / static_cast<double>(end - start));
      if (!batch.all_finite()) throw NumericError("train: non-finite gradient in epoch " + std::to_string(epoch));
      opt.step(model, batch);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  result.model = std::move(model);
  return result;
}

}  // namespace smartpilot::kernel
