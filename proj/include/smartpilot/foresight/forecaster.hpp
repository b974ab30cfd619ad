#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/foresight/types.hpp"
#include "smartpilot/kernel/checkpoint.hpp"
#include "smartpilot/kernel/network.hpp"
#include "smartpilot/kernel/train.hpp"

namespace smartpilot::foresight {

using kernel::Network;
using kernel::Tensor;

/// Min-max scaling to [0, 1]. A constant column maps to 0.
struct MinMax {
  double lo = 0.0;
  double hi = 1.0;

  static MinMax fit(std::span<const double> xs) {
    if (xs.empty()) throw InputError("min-max: no data");
    MinMax m{xs[0], xs[0]};
    for (double x : xs) {
      m.lo = std::min(m.lo, x);
      m.hi = std::max(m.hi, x);
    }
    return m;
  }
  double span() const { return hi - lo > 1e-12 ? hi - lo : 1.0; }
  double forward(double x) const { return (x - lo) / span(); }
  double inverse(double y) const { return y * span() + lo; }
  friend bool operator==(const MinMax&, const MinMax&) = default;
};

struct ForecastConfig {
  kernel::TrainConfig train{.learning_rate = 3e-3, .epochs = 12, .batch_size = 32};
  std::size_t lookback = 24;
  std::size_t lstm1 = 64;
  std::size_t lstm2 = 32;
  std::size_t dense = 32;
  std::uint64_t seed = 42;
};

/// Two stacked LSTMs over the scaled target history. With KIL the
/// consolidated LSTM vector is concatenated with the forecast period's
/// structured features before the dense layer.
struct Forecaster {
  bool kil = false;
  std::size_t lookback = 24;
  Network recurrent;  // [lookback x 1] -> [lstm2]
  Network head;       // [lstm2 (+ features)] -> [1]
  MinMax target_scale;
  std::vector<MinMax> feature_scale;
  std::vector<std::string> feature_names;

  std::size_t parameter_count() const { return recurrent.parameter_count() + head.parameter_count(); }
  friend bool operator==(const Forecaster&, const Forecaster&) = default;
};

struct Forecast {
  double value = 0.0;
  double raw = 0.0;     // unclamped model output, series units
  bool clamped = false;
};

namespace detail {

struct ForecastPass {
  Tensor x;
  Tensor head_in;
  double y = 0.0;  // scaled output
  kernel::Tape rec_tape, head_tape;
};

inline ForecastPass run(const Forecaster& m, std::span<const double> window, std::span<const double> feats) {
  if (window.size() != m.lookback)
    throw InputError("forecast window has " + std::to_string(window.size()) + " periods, model lookback is " +
                     std::to_string(m.lookback));
  if (m.kil && feats.size() != m.feature_scale.size())
    throw InputError("forecast features have " + std::to_string(feats.size()) + " entries, model expects " +
                     std::to_string(m.feature_scale.size()));
  ForecastPass p;
  p.x = Tensor({m.lookback, 1});
  for (std::size_t t = 0; t < m.lookback; ++t) p.x[t] = m.target_scale.forward(window[t]);
  const Tensor h = kernel::forward(m.recurrent, p.x, p.rec_tape);
  const std::size_t f = m.kil ? feats.size() : 0;
  p.head_in = Tensor({h.size() + f});
  std::copy(h.values.begin(), h.values.end(), p.head_in.values.begin());
  for (std::size_t i = 0; i < f; ++i) p.head_in[h.size() + i] = m.feature_scale[i].forward(feats[i]);
  p.y = kernel::forward(m.head, p.head_in, p.head_tape)[0];
  return p;
}

}  // namespace detail

/// Pure; negative outputs are clamped to zero and flagged.
inline Forecast forecast_next(const Forecaster& m, std::span<const double> window, std::span<const double> feats = {}) {
  const auto p = detail::run(m, window, feats);
  Forecast f;
  f.raw = m.target_scale.inverse(p.y);
  f.clamped = f.raw < 0.0;
  f.value = f.clamped ? 0.0 : f.raw;
  return f;
}

inline void check_inputs(const ForecastSeries& series, const StructuredFeatures& feats, bool kil, std::size_t lookback) {
  series.validate();
  if (series.size() < lookback + 1)
    throw InputError("series '" + series.product_id + "' has " + std::to_string(series.size()) +
                     " periods; at least lookback + 1 = " + std::to_string(lookback + 1) + " are required");
  if (kil) feats.validate(series.size());
}

inline Forecaster init_forecaster(const ForecastSeries& series, const StructuredFeatures& feats, bool kil,
                                  const ForecastConfig& cfg) {
  check_inputs(series, feats, kil, cfg.lookback);
  Forecaster m;
  m.kil = kil;
  m.lookback = cfg.lookback;
  m.target_scale = MinMax::fit(series.values);
  if (kil) {
    m.feature_names = feats.names;
    for (std::size_t i = 0; i < feats.dim(); ++i) {
      std::vector<double> col;
      for (const auto& r : feats.rows) col.push_back(r[i]);
      m.feature_scale.push_back(MinMax::fit(col));
    }
  }
  m.recurrent = kernel::make_network({kernel::lstm(1, cfg.lstm1, true), kernel::lstm(cfg.lstm1, cfg.lstm2, false)},
                                     cfg.seed ^ 0xf0e1);
  const std::size_t in = cfg.lstm2 + (kil ? feats.dim() : 0);
  m.head = kernel::make_network({kernel::dense(in, cfg.dense, kernel::Activation::relu), kernel::dense(cfg.dense, 1)},
                                cfg.seed ^ 0xf0e2);
  return m;
}

struct TrainedForecaster {
  Forecaster model;
  std::vector<double> loss_history;
};

/// Fits on every period t >= lookback of `series` (scalers fit on the same
/// data). Loss is MSE in scaled units.
inline TrainedForecaster train_forecaster(const ForecastSeries& series, const StructuredFeatures& feats, bool kil,
                                          const ForecastConfig& cfg) {
  cfg.train.validate();
  TrainedForecaster out;
  out.model = init_forecaster(series, feats, kil, cfg);
  Forecaster& m = out.model;
  const std::size_t l = cfg.lookback;
  std::vector<std::size_t> order(series.size() - l);
  kernel::Optimizer rec_opt(cfg.train.optimizer, cfg.train.learning_rate);
  kernel::Optimizer head_opt(cfg.train.optimizer, cfg.train.learning_rate);
  const std::span<const double> none;
  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), l);
    kernel::CounterRng rng(cfg.seed, "forecast/shuffle/" + std::to_string(epoch));
    kernel::shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.train.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.train.batch_size);
      auto g_rec = kernel::zero_gradients(m.recurrent);
      auto g_head = kernel::zero_gradients(m.head);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t t = order[i];
        const std::span<const double> window(series.values.data() + t - l, l);
        auto p = detail::run(m, window, kil ? std::span<const double>(feats.rows[t]) : none);
        const double d = p.y - m.target_scale.forward(series.values[t]);
        total += d * d;
        const Tensor dz = kernel::backward(m.head, p.head_tape, Tensor({1}, {2.0 * d}), g_head, true);
        Tensor dh({cfg.lstm2});
        std::copy_n(dz.values.begin(), cfg.lstm2, dh.values.begin());
        kernel::backward(m.recurrent, p.rec_tape, dh, g_rec, false);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      g_rec.scale(inv);
      g_head.scale(inv);
      if (!g_rec.all_finite() || !g_head.all_finite())
        throw NumericError("forecaster: non-finite gradient in epoch " + std::to_string(epoch));
      rec_opt.step(m.recurrent, g_rec);
      head_opt.step(m.head, g_head);
    }
    out.loss_history.push_back(total / static_cast<double>(order.size()));
  }
  return out;
}

struct ForecastResult {
  std::string product_id;
  std::vector<double> forecasts;
  std::vector<double> actuals;
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t clamped = 0;

  double avg_forecast() const { return mean(forecasts); }
  double avg_actual() const { return mean(actuals); }

 private:
  static double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
};

inline ForecastResult score(std::string product_id, std::vector<double> forecasts, std::vector<double> actuals) {
  if (forecasts.size() != actuals.size()) throw InputError("score: forecasts and actuals differ in length");
  if (actuals.empty()) throw InputError("score: empty test set");
  ForecastResult r;
  r.product_id = std::move(product_id);
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    const double e = forecasts[i] - actuals[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const auto n = static_cast<double>(actuals.size());
  r.mae = abs_sum / n;
  r.rmse = std::sqrt(sq_sum / n);
  r.forecasts = std::move(forecasts);
  r.actuals = std::move(actuals);
  return r;
}

/// One-step-ahead forecasts for every period t in [first, size), each using
/// the actual history before t.
inline ForecastResult evaluate(const Forecaster& m, const ForecastSeries& series, const StructuredFeatures& feats,
                               std::optional<std::size_t> first = std::nullopt) {
  const std::size_t begin = first.value_or(m.lookback);
  if (begin < m.lookback) throw InputError("evaluate: first forecast period precedes a full lookback window");
  if (begin >= series.size()) throw InputError("evaluate: empty test set");
  if (m.kil) feats.validate(series.size());
  std::vector<double> fc, act;
  std::size_t clamped = 0;
  for (std::size_t t = begin; t < series.size(); ++t) {
    const std::span<const double> window(series.values.data() + t - m.lookback, m.lookback);
    const auto f = forecast_next(m, window, m.kil ? std::span<const double>(feats.rows[t]) : std::span<const double>{});
    clamped += f.clamped;
    fc.push_back(f.value);
    act.push_back(series.values[t]);
  }
  auto r = score(series.product_id, std::move(fc), std::move(act));
  r.clamped = clamped;
  return r;
}

/// Bias-reduction improvement of `kil` over `base`, in percent, from the
/// averages: e = avg_forecast - avg_actual, (|e_base| - |e_kil|) / |e_base| * 100.
/// Undefined (nullopt) when the baseline has no bias.
inline std::optional<double> improvement(double base_avg_forecast, double base_avg_actual, double kil_avg_forecast,
                                         double kil_avg_actual) {
  const double e_base = base_avg_forecast - base_avg_actual;
  const double e_kil = kil_avg_forecast - kil_avg_actual;
  if (e_base == 0.0) return std::nullopt;
  return (std::abs(e_base) - std::abs(e_kil)) / std::abs(e_base) * 100.0;
}

inline std::optional<double> improvement(const ForecastResult& base, const ForecastResult& kil) {
  return improvement(base.avg_forecast(), base.avg_actual(), kil.avg_forecast(), kil.avg_actual());
}

/// Train/test split by time: the first `train_fraction` of periods train.
struct SeriesSplit {
  ForecastSeries train;
  StructuredFeatures train_feats;
  std::size_t test_begin = 0;  // first forecast period in the full series
};

inline SeriesSplit split_series(const ForecastSeries& s, const StructuredFeatures& f, double train_fraction,
                                std::size_t lookback) {
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(s.size())));
  if (n_train < lookback + 1 || n_train >= s.size())
    throw InputError("split leaves too few periods for series '" + s.product_id + "'");
  SeriesSplit out;
  out.train = s;
  out.train.values.resize(n_train);
  out.train.timestamps.resize(n_train);
  out.train_feats.names = f.names;
  out.train_feats.rows.assign(f.rows.begin(), f.rows.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, f.rows.size())));
  out.test_begin = n_train;
  return out;
}

/// Baseline vs KIL for one product: Table II/III-shaped row.
struct ProductReport {
  std::string product_id;
  ForecastResult base;
  ForecastResult kil;
  std::optional<double> improvement_pct;
};

inline ProductReport compare_product(const ForecastSeries& s, const StructuredFeatures& f, const ForecastConfig& cfg,
                                     double train_fraction = 0.8) {
  const auto split = split_series(s, f, train_fraction, cfg.lookback);
  ProductReport r;
  r.product_id = s.product_id;
  const auto base = train_forecaster(split.train, split.train_feats, false, cfg);
  const auto kil = train_forecaster(split.train, split.train_feats, true, cfg);
  r.base = evaluate(base.model, s, f, split.test_begin);
  r.kil = evaluate(kil.model, s, f, split.test_begin);
  r.improvement_pct = improvement(r.base, r.kil);
  return r;
}

inline nlohmann::json to_json(const ForecastResult& r) {
  return {{"product_id", r.product_id}, {"mae", r.mae},           {"rmse", r.rmse},
          {"avg_forecast", r.avg_forecast()}, {"avg_actual", r.avg_actual()}, {"n", r.actuals.size()},
          {"clamped", r.clamped}};
}

inline nlohmann::json to_json(const ProductReport& r) {
  nlohmann::json j{{"product_id", r.product_id}, {"lstm", to_json(r.base)}, {"kil", to_json(r.kil)}};
  j["improvement_pct"] = r.improvement_pct ? nlohmann::json(*r.improvement_pct) : nlohmann::json(nullptr);
  return j;
}

inline std::string format_table(const std::vector<ProductReport>& rows) {
  std::ostringstream os;
  char line[200];
  std::snprintf(line, sizeof line, "%-14s %9s %9s %9s %9s %11s %11s %9s %12s\n", "product", "lstm_mae", "lstm_rmse",
                "kil_mae", "kil_rmse", "lstm_avg_fc", "kil_avg_fc", "avg_act", "improvement");
  os << line;
  for (const auto& r : rows) {
    const std::string imp = r.improvement_pct ? std::to_string(*r.improvement_pct).substr(0, 7) + "%" : "undefined";
    std::snprintf(line, sizeof line, "%-14s %9.3f %9.3f %9.3f %9.3f %11.3f %11.3f %9.3f %12s\n", r.product_id.c_str(),
                  r.base.mae, r.base.rmse, r.kil.mae, r.kil.rmse, r.base.avg_forecast(), r.kil.avg_forecast(),
                  r.base.avg_actual(), imp.c_str());
    os << line;
  }
  return os.str();
}

inline nlohmann::json to_json(const Forecaster& m) {
  nlohmann::json scales = nlohmann::json::array();
  for (const auto& s : m.feature_scale) scales.push_back({s.lo, s.hi});
  return {{"format", "smartpilot-forecaster"},
          {"version", 1},
          {"kil", m.kil},
          {"lookback", m.lookback},
          {"recurrent", kernel::to_json(m.recurrent)},
          {"head", kernel::to_json(m.head)},
          {"target_scale", {m.target_scale.lo, m.target_scale.hi}},
          {"feature_scale", scales},
          {"feature_names", m.feature_names}};
}

inline Forecaster forecaster_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "smartpilot-forecaster") throw ValidationError("not a forecaster checkpoint");
    Forecaster m;
    m.kil = j.at("kil").get<bool>();
    m.lookback = j.at("lookback").get<std::size_t>();
    m.recurrent = kernel::network_from_json(j.at("recurrent"));
    m.head = kernel::network_from_json(j.at("head"));
    m.target_scale = {j.at("target_scale")[0].get<double>(), j.at("target_scale")[1].get<double>()};
    for (const auto& s : j.at("feature_scale")) m.feature_scale.push_back({s[0].get<double>(), s[1].get<double>()});
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("forecaster checkpoint malformed: ") + e.what());
  }
}

}  // namespace smartpilot::foresight
