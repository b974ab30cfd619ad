#pragma once

#include <cmath>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/foresight/forecaster.hpp"
#include "smartpilot/ontology/ontology.hpp"
#include "smartpilot/predictx/fusion.hpp"
#include "smartpilot/runtime/types.hpp"

namespace smartpilot::runtime {

/// Mutex-guarded pointer to an immutable value; readers keep what they got.
template <typename T>
class SnapshotCell {
 public:
  SnapshotCell() = default;
  explicit SnapshotCell(std::shared_ptr<const T> v) : value_(std::move(v)) {}
  std::shared_ptr<const T> get() const {
    std::lock_guard lock(mu_);
    return value_;
  }
  void set(std::shared_ptr<const T> v) {
    std::lock_guard lock(mu_);
    value_ = std::move(v);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const T> value_;
};

/// One prediction per log line, without the wall-clock latency, so two runs
/// over the same frames and snapshots produce identical bytes.
inline std::string prediction_log_line(const predictx::PredictionResult& p) {
  auto j = predictx::to_json(p);
  j.erase("latency_ms");
  return j.dump();
}

/// Turns frames into predictions: keeps the last window_len frames, predicts
/// every `stride` frames once the window is full, attaches an explanation
/// for the newest frame when the ontology knows its state.
class PredictXAgent {
 public:
  PredictXAgent(std::shared_ptr<const predictx::FusionModel> model,
                const SnapshotCell<ontology::ProcessOntology>* ontology = nullptr, std::size_t stride = 1)
      : model_(std::move(model)), ontology_(ontology), stride_(stride) {
    if (!model_) throw ConfigError("PredictX agent needs a model");
    if (stride_ == 0) throw ConfigError("prediction stride must be at least 1");
    image_.vector.assign(model_->image_dim, 0.0);
  }

  std::optional<predictx::PredictionResult> on_frame(const TagFrame& f) {
    const auto& m = *model_;
    std::vector<double> row(m.n_channels);
    for (std::size_t c = 0; c < m.n_channels; ++c) {
      const double* v = f.number(m.channel_names[c]);
      if (!v) {
        ++skipped_;
        return std::nullopt;
      }
      row[c] = *v;
    }
    update_image(f);
    const std::string* st = f.text("state");
    rows_.push_back(std::move(row));
    states_.push_back(st ? *st : std::string{});
    if (rows_.size() > m.window_len) {
      rows_.pop_front();
      states_.pop_front();
    }
    if (rows_.size() < m.window_len) return std::nullopt;
    if (since_last_ != 0 && since_last_ < stride_) {
      ++since_last_;
      return std::nullopt;
    }
    since_last_ = 1;

    predictx::SensorWindow w;
    w.window_len = m.window_len;
    w.n_channels = m.n_channels;
    w.timestamp = f.timestamp;
    w.frames.reserve(m.window_len * m.n_channels);
    for (const auto& r : rows_) w.frames.insert(w.frames.end(), r.begin(), r.end());
    w.state_ids.assign(states_.begin(), states_.end());
    auto p = predictx::fuse_predict(m, w, image_);
    p.id = ++next_id_;
    if (ontology_) {
      const auto onto = ontology_->get();
      if (onto && onto->has_state(w.state_ids.back()))
        p.explanation = predictx::explain(p, rows_.back(), m.channel_names, w.state_ids.back(), *onto);
    }
    return p;
  }

  std::size_t skipped_frames() const { return skipped_; }

 private:
  void update_image(const TagFrame& f) {
    const std::size_t dim = model_->image_dim;
    if (dim == 0) return;
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double* x = f.number("image." + std::to_string(i));
      if (!x) return;
      v[i] = *x;
    }
    image_.vector = std::move(v);
    image_.timestamp = f.timestamp;
  }

  std::shared_ptr<const predictx::FusionModel> model_;
  const SnapshotCell<ontology::ProcessOntology>* ontology_;
  std::size_t stride_;
  std::deque<std::vector<double>> rows_;
  std::deque<std::string> states_;
  predictx::ImageFeatures image_;
  std::size_t since_last_ = 0;
  std::uint64_t next_id_ = 0;
  std::size_t skipped_ = 0;
};

/// A trained forecaster with the history it forecasts from and its held-out
/// evaluation.
struct ProductModel {
  foresight::ProductSeries data;
  foresight::Forecaster model;
  std::optional<foresight::ForecastResult> evaluation;
};

struct LiveForecast {
  foresight::ForecastResult result;  // forecasts = {next period}; metrics from the evaluation
  double raw = 0.0;
  double anomaly_rate = 0.0;
};

inline nlohmann::json to_json(const LiveForecast& f) {
  auto j = foresight::to_json(f.result);
  j["next"] = f.result.forecasts.empty() ? nlohmann::json(nullptr) : nlohmann::json(f.result.forecasts.back());
  j["raw"] = f.raw;
  j["anomaly_rate"] = f.anomaly_rate;
  return j;
}

/// Next-period forecast per product. The forecast period's structured
/// features are the latest row with "anomaly_rate" replaced by the live
/// insight; products are only recomputed when that rate changes.
class ForeSightAgent {
 public:
  explicit ForeSightAgent(std::vector<ProductModel> products) : products_(std::move(products)) {
    for (const auto& p : products_) {
      if (p.data.series.values.size() < p.model.lookback)
        throw InputError("product " + p.data.series.product_id + " has fewer periods than the lookback");
      if (p.model.kil && p.data.features.rows.empty())
        throw InputError("product " + p.data.series.product_id + " has no structured features");
    }
  }

  const std::vector<ProductModel>& products() const { return products_; }

  LiveForecast forecast(const ProductModel& p, double anomaly_rate) const {
    const auto& vals = p.data.series.values;
    std::span<const double> window(vals.data() + vals.size() - p.model.lookback, p.model.lookback);
    std::vector<double> feats;
    if (p.model.kil) {
      feats = p.data.features.rows.back();
      for (std::size_t i = 0; i < p.data.features.names.size(); ++i)
        if (p.data.features.names[i] == "anomaly_rate") feats[i] = anomaly_rate;
    }
    const auto f = foresight::forecast_next(p.model, window, feats);
    LiveForecast out;
    out.result.product_id = p.data.series.product_id;
    out.result.forecasts = {f.value};
    out.result.clamped = f.clamped ? 1 : 0;
    if (p.evaluation) {
      out.result.mae = p.evaluation->mae;
      out.result.rmse = p.evaluation->rmse;
    }
    out.raw = f.raw;
    out.anomaly_rate = anomaly_rate;
    return out;
  }

  /// Forecasts for every product whose input changed.
  std::vector<LiveForecast> on_insight(const AnomalyInsight& in) {
    std::vector<LiveForecast> out;
    if (last_rate_ && *last_rate_ == in.window_anomaly_rate) return out;
    last_rate_ = in.window_anomaly_rate;
    for (const auto& p : products_) out.push_back(forecast(p, in.window_anomaly_rate));
    return out;
  }

 private:
  std::vector<ProductModel> products_;
  std::optional<double> last_rate_;
};

}  // namespace smartpilot::runtime
