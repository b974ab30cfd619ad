#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "smartpilot/errors.hpp"
#include "smartpilot/kernel/tensor.hpp"

namespace smartpilot::kernel {

enum class LossKind {
  mse,
  wmse,
  cross_entropy,          // prediction slice holds probabilities
  softmax_cross_entropy,  // prediction slice holds logits
  range_hinge,            // quadratic hinge outside [lo, hi]; target unused
};

/// One weighted term of a loss, applied to prediction/target elements
/// [offset, offset + length). length == 0 means "to the end".
struct LossTerm {
  LossKind kind = LossKind::mse;
  double weight = 1.0;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::vector<double> channel_weights;  // wmse
  // range_hinge: bounds in raw units, with raw = prediction * scale + shift.
  std::vector<double> lo, hi, scale, shift;
};

/// A loss is a weighted sum of terms; a single-term spec is the plain loss.
struct LossSpec {
  std::vector<LossTerm> terms;

  static LossSpec mse() { return {{LossTerm{LossKind::mse}}}; }
  static LossSpec wmse(std::vector<double> w) {
    LossTerm t{LossKind::wmse};
    t.channel_weights = std::move(w);
    return {{t}};
  }
  static LossSpec cross_entropy() { return {{LossTerm{LossKind::cross_entropy}}}; }
  static LossSpec softmax_cross_entropy() { return {{LossTerm{LossKind::softmax_cross_entropy}}}; }

  bool is_composite() const { return terms.size() > 1; }
};

struct LossValue {
  double value = 0.0;
  Tensor grad;  // d value / d prediction
};

inline double wmse_value(std::span<const double> pred, std::span<const double> target, std::span<const double> w) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    const double d = pred[i] - target[i];
    num += wi * d * d;
    den += wi;
  }
  return num / den;
}

inline double hinge_value(double v, double lo, double hi) {
  const double below = std::max(0.0, lo - v);
  const double above = std::max(0.0, v - hi);
  return below * below + above * above;
}

inline double hinge_derivative(double v, double lo, double hi) {
  return -2.0 * std::max(0.0, lo - v) + 2.0 * std::max(0.0, v - hi);
}

inline LossValue evaluate_loss(const LossSpec& spec, const Tensor& prediction, const Tensor& target) {
  LossValue out{0.0, Tensor(prediction.shape)};
  for (const auto& term : spec.terms) {
    const std::size_t n = term.length == 0 ? prediction.size() - std::min(term.offset, prediction.size()) : term.length;
    if (term.offset + n > prediction.size())
      throw DimensionError("loss: term slice exceeds prediction size " + std::to_string(prediction.size()));
    const bool uses_target = term.kind != LossKind::range_hinge;
    if (uses_target && term.offset + n > target.size())
      throw DimensionError("loss: term slice exceeds target size " + std::to_string(target.size()));
    const std::span<const double> p(prediction.values.data() + term.offset, n);
    const std::span<const double> t =
        uses_target ? std::span<const double>(target.values.data() + term.offset, n) : std::span<const double>{};
    double* g = out.grad.values.data() + term.offset;
    const double w = term.weight;
    double value = 0.0;
    switch (term.kind) {
      case LossKind::mse:
        for (std::size_t i = 0; i < n; ++i) {
          const double d = p[i] - t[i];
          value += d * d;
          g[i] += w * 2.0 * d / static_cast<double>(n);
        }
        value /= static_cast<double>(n);
        break;
      case LossKind::wmse: {
        if (!term.channel_weights.empty() && term.channel_weights.size() != n)
          throw DimensionError("loss: wmse weights have " + std::to_string(term.channel_weights.size()) +
                               " entries for " + std::to_string(n) + " outputs");
        double den = 0.0;
        for (std::size_t i = 0; i < n; ++i) den += term.channel_weights.empty() ? 1.0 : term.channel_weights[i];
        for (std::size_t i = 0; i < n; ++i) {
          const double wi = term.channel_weights.empty() ? 1.0 : term.channel_weights[i];
          const double d = p[i] - t[i];
          value += wi * d * d;
          g[i] += w * 2.0 * wi * d / den;
        }
        value /= den;
        break;
      }
      case LossKind::cross_entropy:
        for (std::size_t i = 0; i < n; ++i) {
          if (t[i] == 0.0) continue;
          value -= t[i] * std::log(p[i]);
          g[i] += -w * t[i] / p[i];
        }
        break;
      case LossKind::softmax_cross_entropy: {
        const double m = *std::max_element(p.begin(), p.end());
        double sum = 0.0, tsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          sum += std::exp(p[i] - m);
          tsum += t[i];
        }
        const double log_sum = std::log(sum) + m;
        for (std::size_t i = 0; i < n; ++i) {
          const double prob = std::exp(p[i] - log_sum);
          value -= t[i] * (p[i] - log_sum);
          g[i] += w * (prob * tsum - t[i]);
        }
        break;
      }
      case LossKind::range_hinge:
        if (term.lo.size() != n || term.hi.size() != n)
          throw DimensionError("loss: range bounds do not match slice width " + std::to_string(n));
        for (std::size_t i = 0; i < n; ++i) {
          const double sc = term.scale.empty() ? 1.0 : term.scale[i];
          const double sh = term.shift.empty() ? 0.0 : term.shift[i];
          const double raw = p[i] * sc + sh;
          value += hinge_value(raw, term.lo[i], term.hi[i]);
          g[i] += w * sc * hinge_derivative(raw, term.lo[i], term.hi[i]);
        }
        break;
    }
    out.value += w * value;
  }
  if (!std::isfinite(out.value)) {
    std::ostringstream os;
    os << "loss is not finite: " << out.value;
    throw NumericError(os.str());
  }
  return out;
}

}  // namespace smartpilot::kernel
