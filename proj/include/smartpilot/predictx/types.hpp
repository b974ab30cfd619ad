#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/ontology/ontology.hpp"

namespace smartpilot::predictx {

/// The six missing-part anomaly types plus Normal. Enumeration order is the
/// report order and the argmax tie-break order.
enum class AnomalyClass : std::uint8_t {
  Normal,
  NoNose,
  NoBody1,
  NoBody2,
  NoNose_NoBody2,
  NoBody2_NoBody1,
  NoNose_NoBody2_NoBody1,
};

inline constexpr std::size_t kClassCount = 7;

inline constexpr std::array<AnomalyClass, kClassCount> kAllClasses{
    AnomalyClass::Normal,         AnomalyClass::NoNose,          AnomalyClass::NoBody1,
    AnomalyClass::NoBody2,        AnomalyClass::NoNose_NoBody2,  AnomalyClass::NoBody2_NoBody1,
    AnomalyClass::NoNose_NoBody2_NoBody1};

inline const char* to_string(AnomalyClass c) {
  switch (c) {
    case AnomalyClass::Normal: return "Normal";
    case AnomalyClass::NoNose: return "NoNose";
    case AnomalyClass::NoBody1: return "NoBody1";
    case AnomalyClass::NoBody2: return "NoBody2";
    case AnomalyClass::NoNose_NoBody2: return "NoNose_NoBody2";
    case AnomalyClass::NoBody2_NoBody1: return "NoBody2_NoBody1";
    case AnomalyClass::NoNose_NoBody2_NoBody1: return "NoNose_NoBody2_NoBody1";
  }
  return "?";
}

inline AnomalyClass anomaly_class_from_string(const std::string& s) {
  for (auto c : kAllClasses)
    if (s == to_string(c)) return c;
  throw InputError("unknown anomaly class '" + s + "'");
}

inline std::size_t index_of(AnomalyClass c) { return static_cast<std::size_t>(c); }
inline bool is_anomalous(AnomalyClass c) { return c != AnomalyClass::Normal; }

// Missing-part components: bit 0 nose, bit 1 body 1, bit 2 body 2.
inline constexpr unsigned kNose = 1, kBody1 = 2, kBody2 = 4;

inline unsigned components_of(AnomalyClass c) {
  switch (c) {
    case AnomalyClass::Normal: return 0;
    case AnomalyClass::NoNose: return kNose;
    case AnomalyClass::NoBody1: return kBody1;
    case AnomalyClass::NoBody2: return kBody2;
    case AnomalyClass::NoNose_NoBody2: return kNose | kBody2;
    case AnomalyClass::NoBody2_NoBody1: return kBody2 | kBody1;
    case AnomalyClass::NoNose_NoBody2_NoBody1: return kNose | kBody1 | kBody2;
  }
  return 0;
}

/// [window_len x n_channels] frames with the cycle state of every frame.
struct SensorWindow {
  std::vector<double> frames;  // row-major
  std::size_t window_len = 0;
  std::size_t n_channels = 0;
  std::vector<std::string> state_ids;
  std::int64_t timestamp = 0;  // ms, of the last frame
  AnomalyClass label = AnomalyClass::Normal;

  std::span<const double> frame(std::size_t t) const { return {frames.data() + t * n_channels, n_channels}; }
  std::span<const double> last_frame() const { return frame(window_len - 1); }
  friend bool operator==(const SensorWindow&, const SensorWindow&) = default;
};

struct ImageFeatures {
  std::vector<double> vector;
  std::string source_camera;
  std::int64_t timestamp = 0;
  friend bool operator==(const ImageFeatures&, const ImageFeatures&) = default;
};

/// One training/evaluation example: window, camera features, and the frame
/// that follows the window together with its cycle state.
struct LabeledSample {
  SensorWindow window;
  ImageFeatures image;
  std::vector<double> next_frame;
  std::string next_state;
  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct Dataset {
  std::vector<std::string> channel_names;
  std::vector<LabeledSample> samples;
};

struct PredictionResult {
  std::uint64_t id = 0;
  std::int64_t timestamp = 0;
  std::string state_id;
  std::vector<double> next_frame;
  std::array<double, kClassCount> class_probs{};
  AnomalyClass predicted_class = AnomalyClass::Normal;
  std::optional<ontology::Explanation> explanation;
  double latency_ms = 0.0;
};

// First maximum wins, so ties resolve in enumeration order.
inline AnomalyClass argmax_class(const std::array<double, kClassCount>& probs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kClassCount; ++k)
    if (probs[k] > probs[best]) best = k;
  return kAllClasses[best];
}

inline nlohmann::json to_json(const PredictionResult& p) {
  nlohmann::json probs = nlohmann::json::object();
  for (auto c : kAllClasses) probs[to_string(c)] = p.class_probs[index_of(c)];
  nlohmann::json j{{"id", p.id},
                   {"timestamp", p.timestamp},
                   {"state_id", p.state_id},
                   {"next_frame", p.next_frame},
                   {"class_probs", probs},
                   {"predicted_class", to_string(p.predicted_class)},
                   {"latency_ms", p.latency_ms}};
  if (p.explanation) j["explanation"] = ontology::to_json(*p.explanation);
  return j;
}

enum class FusionVariant { B1, B2, P1, P2, P3 };

inline constexpr std::array<FusionVariant, 5> kAllVariants{FusionVariant::B1, FusionVariant::B2, FusionVariant::P1,
                                                           FusionVariant::P2, FusionVariant::P3};

inline const char* to_string(FusionVariant v) {
  switch (v) {
    case FusionVariant::B1: return "B1";
    case FusionVariant::B2: return "B2";
    case FusionVariant::P1: return "P1";
    case FusionVariant::P2: return "P2";
    case FusionVariant::P3: return "P3";
  }
  return "?";
}

inline FusionVariant fusion_variant_from_string(const std::string& s) {
  for (auto v : kAllVariants)
    if (s == to_string(v)) return v;
  throw InputError("unknown variant '" + s + "' (expected B1, B2, P1, P2 or P3)");
}

inline bool uses_time_series(FusionVariant v) { return v != FusionVariant::B2; }
inline bool uses_image(FusionVariant v) { return v != FusionVariant::B1; }
inline bool freezes_encoder(FusionVariant v) { return v == FusionVariant::P2 || v == FusionVariant::P3; }
inline bool uses_range_penalty(FusionVariant v) { return v == FusionVariant::P3; }

}  // namespace smartpilot::predictx
