#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/foresight/forecaster.hpp"
#include "smartpilot/predictx/types.hpp"

namespace smartpilot::runtime {

using TagValue = std::variant<double, std::string>;

struct TagUpdate {
  std::string tag;
  TagValue value;
  std::int64_t timestamp = 0;
  std::string facility_id;
  friend bool operator==(const TagUpdate&, const TagUpdate&) = default;
};

/// All updates of one facility sharing a timestamp.
struct TagFrame {
  std::int64_t timestamp = 0;
  std::string facility_id;
  std::map<std::string, TagValue> values;

  const double* number(const std::string& tag) const {
    auto it = values.find(tag);
    return it == values.end() ? nullptr : std::get_if<double>(&it->second);
  }
  const std::string* text(const std::string& tag) const {
    auto it = values.find(tag);
    return it == values.end() ? nullptr : std::get_if<std::string>(&it->second);
  }
  friend bool operator==(const TagFrame&, const TagFrame&) = default;
};

struct AnomalyInsight {
  double window_anomaly_rate = 0.0;
  std::map<predictx::AnomalyClass, std::size_t> recent_classes;
  bool degraded = false;
  std::size_t window = 0;
  std::int64_t timestamp = 0;
};

inline nlohmann::json to_json(const TagValue& v) {
  return std::holds_alternative<double>(v) ? nlohmann::json(std::get<double>(v)) : nlohmann::json(std::get<std::string>(v));
}

inline nlohmann::json to_json(const TagFrame& f) {
  nlohmann::json vals = nlohmann::json::object();
  for (const auto& [k, v] : f.values) vals[k] = to_json(v);
  return {{"timestamp", f.timestamp}, {"facility_id", f.facility_id}, {"values", vals}};
}

inline nlohmann::json to_json(const AnomalyInsight& i) {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [c, n] : i.recent_classes) classes[predictx::to_string(c)] = n;
  return {{"window_anomaly_rate", i.window_anomaly_rate},
          {"recent_classes", classes},
          {"degraded", i.degraded},
          {"window", i.window},
          {"timestamp", i.timestamp}};
}

using Payload = std::variant<predictx::PredictionResult, foresight::ForecastResult, AnomalyInsight, TagFrame>;

struct AgentMessage {
  std::string topic;
  Payload payload;
  std::uint64_t seq = 0;
  std::int64_t emitted_at = 0;
};

}  // namespace smartpilot::runtime
