#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/foresight/types.hpp"
#include "smartpilot/kernel/rng.hpp"

namespace smartpilot::datagen {

/// Vegemite-like hourly production:
///   target(t) = a * raw_material(t) + b * target(t-1) + noise,  clamped at 0.
/// raw_material holds a level for a while, then jumps to a new one.
/// process_ratio and anomaly_rate are context columns with no effect on the target.
struct ForecastGenConfig {
  std::uint64_t seed = 42;
  std::vector<std::string> products{"Yeast-BRD", "Yeast-BRN", "Yeast-FMX"};
  std::size_t n_periods = 360;
  std::int64_t period_ms = foresight::kHourMs;
  std::int64_t start_ms = 1'700'000'000'000;
  double a = 0.5;
  double b = 0.5;
  double noise_sigma = 1.0;
  // Raw material: level in [level_lo, level_hi], jump probability per period,
  // jitter around the level.
  double level_lo = 20.0;
  double level_hi = 100.0;
  double shift_probability = 0.1;
  double raw_jitter = 2.0;

  void validate() const {
    if (products.empty() || n_periods < 2) throw ConfigError("forecast generator needs products and >= 2 periods");
    if (period_ms <= 0) throw ConfigError("period_ms must be positive");
    if (noise_sigma < 0.0 || raw_jitter < 0.0) throw ConfigError("noise levels must be non-negative");
    if (level_lo < 0.0 || level_hi < level_lo) throw ConfigError("raw material levels must satisfy 0 <= lo <= hi");
    if (shift_probability < 0.0 || shift_probability > 1.0) throw ConfigError("shift_probability must lie in [0, 1]");
  }
};

inline const std::vector<std::string>& forecast_feature_names() {
  static const std::vector<std::string> names{"raw_material", "process_ratio", "anomaly_rate"};
  return names;
}

inline std::vector<foresight::ProductSeries> gen_forecast(const ForecastGenConfig& cfg) {
  cfg.validate();
  std::vector<foresight::ProductSeries> out;
  for (const auto& product : cfg.products) {
    kernel::CounterRng rng(cfg.seed, "forecast/" + product);
    foresight::ProductSeries p;
    p.series.product_id = product;
    p.series.period_ms = cfg.period_ms;
    p.features.names = forecast_feature_names();
    double level = rng.uniform(cfg.level_lo, cfg.level_hi);
    double ratio = rng.uniform(0.3, 0.6);
    double prev = cfg.a * level / std::max(1e-9, 1.0 - cfg.b);
    double burst = 0.0;
    for (std::size_t t = 0; t < cfg.n_periods; ++t) {
      if (rng.bernoulli(cfg.shift_probability)) level = rng.uniform(cfg.level_lo, cfg.level_hi);
      const double raw = std::max(0.0, level + cfg.raw_jitter * rng.normal());
      ratio = std::clamp(ratio + 0.01 * rng.normal(), 0.1, 0.9);
      burst = rng.bernoulli(0.03) ? rng.uniform(0.3, 1.0) : 0.7 * burst;
      const double target = std::max(0.0, cfg.a * raw + cfg.b * prev + cfg.noise_sigma * rng.normal());
      p.series.values.push_back(target);
      p.series.timestamps.push_back(cfg.start_ms + static_cast<std::int64_t>(t) * cfg.period_ms);
      p.features.rows.push_back({raw, ratio, burst});
      prev = target;
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline nlohmann::json forecast_metadata(const ForecastGenConfig& cfg) {
  return {{"seed", cfg.seed},
          {"formula", "target(t) = a*raw_material(t) + b*target(t-1) + N(0, noise_sigma^2), clamped at 0"},
          {"a", cfg.a},
          {"b", cfg.b},
          {"noise_sigma", cfg.noise_sigma},
          {"shift_probability", cfg.shift_probability},
          {"level_range", {cfg.level_lo, cfg.level_hi}},
          {"features", forecast_feature_names()},
          {"products", cfg.products},
          {"n_periods", cfg.n_periods},
          {"period_ms", cfg.period_ms}};
}

}  // namespace smartpilot::datagen
