#pragma once

#include <algorithm>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>

#include "smartpilot/infoguide/answer.hpp"
#include "smartpilot/runtime/types.hpp"

namespace smartpilot::runtime {

struct LiveSnapshot {
  std::optional<predictx::PredictionResult> latest_prediction;
  std::optional<foresight::ForecastResult> latest_forecast;
  std::optional<AnomalyInsight> latest_insight;
  std::int64_t updated_at = 0;
  std::uint64_t version = 0;

  infoguide::LiveView view() const {
    infoguide::LiveView v;
    v.prediction = latest_prediction;
    v.forecast = latest_forecast;
    if (latest_insight) {
      v.anomaly_rate = latest_insight->window_anomaly_rate;
      v.insight_window = latest_insight->window;
      v.degraded = latest_insight->degraded;
    }
    return v;
  }
};

/// Single-writer, many-reader cell. Writers build a new snapshot from the
/// current one and swap the pointer; readers hold an immutable snapshot.
class LiveState {
 public:
  LiveState() : current_(std::make_shared<const LiveSnapshot>()) {}

  std::shared_ptr<const LiveSnapshot> snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
  }

  template <typename Fn>
  void update(std::int64_t at, Fn&& mutate) {
    std::lock_guard wl(write_mu_);
    auto next = std::make_shared<LiveSnapshot>(*snapshot());
    mutate(*next);
    next->updated_at = std::max(next->updated_at, at);
    ++next->version;
    std::lock_guard lock(mu_);
    current_ = std::move(next);
  }

  void set_prediction(const predictx::PredictionResult& p, std::int64_t at) {
    update(at, [&](LiveSnapshot& s) { s.latest_prediction = p; });
  }
  void set_forecast(const foresight::ForecastResult& f, std::int64_t at) {
    update(at, [&](LiveSnapshot& s) { s.latest_forecast = f; });
  }
  void set_insight(const AnomalyInsight& i, std::int64_t at) {
    update(at, [&](LiveSnapshot& s) { s.latest_insight = i; });
  }

 private:
  mutable std::mutex mu_;
  std::mutex write_mu_;
  std::shared_ptr<const LiveSnapshot> current_;
};

/// Sliding anomaly rate over the last `window` predictions.
class InsightBridge {
 public:
  explicit InsightBridge(std::size_t window = 10, double threshold = 0.3) : window_(window), threshold_(threshold) {
    if (window == 0) throw ConfigError("insight window must be at least 1");
  }

  AnomalyInsight push(const predictx::PredictionResult& p) {
    recent_.push_back(p.predicted_class);
    if (recent_.size() > window_) recent_.pop_front();
    AnomalyInsight in;
    in.window = window_;
    in.timestamp = p.timestamp;
    std::size_t anomalous = 0;
    for (auto c : recent_) {
      ++in.recent_classes[c];
      anomalous += predictx::is_anomalous(c);
    }
    // Until the window fills, the rate is over what has been seen.
    in.window_anomaly_rate = static_cast<double>(anomalous) / static_cast<double>(recent_.size());
    in.degraded = in.window_anomaly_rate > threshold_;
    return in;
  }

  std::size_t window() const { return window_; }
  double threshold() const { return threshold_; }

 private:
  std::size_t window_;
  double threshold_;
  std::deque<predictx::AnomalyClass> recent_;
};

}  // namespace smartpilot::runtime
