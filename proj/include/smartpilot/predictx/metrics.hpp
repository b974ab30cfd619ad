#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/predictx/types.hpp"

namespace smartpilot::predictx {

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Support-weighted precision/recall/F1 plus exact-match accuracy.
struct WeightedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::size_t support = 0;
  std::vector<ClassMetrics> per_class;

  const ClassMetrics* find(const std::string& name) const {
    for (const auto& c : per_class)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Metrics over integer class ids in [0, names.size()). Ratios with a zero
/// denominator are 0.
inline WeightedMetrics compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                       const std::vector<std::string>& names) {
  if (predictions.size() != labels.size())
    throw InputError("metrics: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw InputError("metrics: no samples");
  const std::size_t k = names.size();
  std::vector<std::size_t> tp(k, 0), predicted(k, 0), actual(k, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] >= k || labels[i] >= k) throw InputError("metrics: class id out of range");
    ++predicted[predictions[i]];
    ++actual[labels[i]];
    if (predictions[i] == labels[i]) {
      ++tp[labels[i]];
      ++correct;
    }
  }
  WeightedMetrics m;
  m.support = labels.size();
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  for (std::size_t c = 0; c < k; ++c) {
    ClassMetrics cm;
    cm.name = names[c];
    cm.support = actual[c];
    cm.precision = predicted[c] ? static_cast<double>(tp[c]) / static_cast<double>(predicted[c]) : 0.0;
    cm.recall = actual[c] ? static_cast<double>(tp[c]) / static_cast<double>(actual[c]) : 0.0;
    cm.f1 = (cm.precision + cm.recall) > 0.0 ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
    const double w = static_cast<double>(cm.support) / static_cast<double>(labels.size());
    m.precision += w * cm.precision;
    m.recall += w * cm.recall;
    m.f1 += w * cm.f1;
    m.per_class.push_back(std::move(cm));
  }
  return m;
}

inline std::vector<std::string> class_names() {
  std::vector<std::string> names;
  for (auto c : kAllClasses) names.emplace_back(to_string(c));
  return names;
}

inline WeightedMetrics compute_weighted_metrics(std::span<const AnomalyClass> predictions,
                                                std::span<const AnomalyClass> labels) {
  if (predictions.size() != labels.size())
    throw InputError("metrics: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  std::vector<std::size_t> p, l;
  for (auto c : predictions) p.push_back(index_of(c));
  for (auto c : labels) l.push_back(index_of(c));
  return compute_metrics(p, l, class_names());
}

/// Two-class anomaly-vs-normal view, used for detection-only baselines.
inline WeightedMetrics compute_detection_metrics(std::span<const AnomalyClass> predictions,
                                                 std::span<const AnomalyClass> labels) {
  if (predictions.size() != labels.size())
    throw InputError("metrics: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  std::vector<std::size_t> p, l;
  for (auto c : predictions) p.push_back(is_anomalous(c) ? 1 : 0);
  for (auto c : labels) l.push_back(is_anomalous(c) ? 1 : 0);
  return compute_metrics(p, l, {"Normal", "Anomalous"});
}

inline nlohmann::json to_json(const WeightedMetrics& m) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& c : m.per_class)
    per.push_back({{"class", c.name}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}});
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"accuracy", m.accuracy},   {"support", m.support}, {"per_class", per}};
}

}  // namespace smartpilot::predictx
