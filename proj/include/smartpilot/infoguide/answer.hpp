#pragma once

#include <chrono>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/foresight/forecaster.hpp"
#include "smartpilot/infoguide/index.hpp"
#include "smartpilot/predictx/types.hpp"

namespace smartpilot::infoguide {

/// What the runtime currently knows, as seen by the question answerer.
struct LiveView {
  std::optional<predictx::PredictionResult> prediction;
  std::optional<foresight::ForecastResult> forecast;
  std::optional<double> anomaly_rate;
  std::size_t insight_window = 0;
  bool degraded = false;
};

enum class LiveIntent { None, AnomalyStatus, ProductionForecast };

inline LiveIntent detect_live_intent(std::string_view query) {
  // Word lists hold lemmas, since tokenize() lemmatizes.
  const auto toks = tokenize(query);
  const std::set<std::string> t(toks.begin(), toks.end());
  auto any = [&](std::initializer_list<const char*> words) {
    for (const char* w : words)
      if (t.count(w)) return true;
    return false;
  };
  const bool now = any({"current", "currently", "latest", "now", "status", "recent", "live", "right", "today"});
  if (any({"forecast"}) || (any({"production", "output"}) && (now || any({"next", "expect", "upcoming"}))))
    return LiveIntent::ProductionForecast;
  if (any({"anomaly", "anomalie", "anomalous"}) && now) return LiveIntent::AnomalyStatus;
  return LiveIntent::None;
}

struct AnswerConfig {
  std::size_t k = 3;
  double alpha = 0.7;
  double refusal_threshold = 0.25;

  void validate() const {
    if (k == 0) throw ConfigError("answer: k must be at least 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("answer: alpha must lie in [0, 1]");
  }
};

enum class AnswerStatus { Answered, Refused };

struct Answer {
  AnswerStatus status = AnswerStatus::Refused;
  std::optional<std::string> text;
  std::vector<RetrievalResult> contexts;
  Generator generator = Generator::ExtractiveFallback;
  double latency_ms = 0.0;
};

inline nlohmann::json to_json(const Answer& a) {
  nlohmann::json ctx = nlohmann::json::array();
  for (const auto& r : a.contexts) ctx.push_back(to_json(r));
  nlohmann::json j{{"status", a.status == AnswerStatus::Answered ? "answered" : "refused"},
                   {"contexts", ctx},
                   {"generator", to_string(a.generator)},
                   {"latency_ms", a.latency_ms}};
  j["text"] = a.text ? nlohmann::json(*a.text) : nlohmann::json(nullptr);
  return j;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string anomaly_template(const LiveView& live) {
  if (!live.prediction) return "No anomaly prediction is available yet.";
  const auto& p = *live.prediction;
  const auto cls = p.predicted_class;
  std::string s = "Current anomaly status: " + std::string(predictx::to_string(cls));
  s += predictx::is_anomalous(cls) ? " (anomaly)" : " (no anomaly)";
  s += " with probability " + fixed(p.class_probs[predictx::index_of(cls)], 2) + ", prediction " +
       std::to_string(p.id) + " at " + std::to_string(p.timestamp) + " ms in state " + p.state_id + ".";
  if (p.explanation && !p.explanation->responsible_variables.empty()) {
    s += " Responsible variables:";
    bool first = true;
    for (const auto& v : p.explanation->responsible_variables) {
      s += first ? " " : ", ";
      first = false;
      s += v.variable + " observed " + fixed(v.observed, 3) + ", expected [" + fixed(v.expected_lo, 3) + ", " +
           fixed(v.expected_hi, 3) + "]";
    }
    s += ".";
  }
  if (live.anomaly_rate) {
    s += " Anomaly rate over the last " + std::to_string(live.insight_window) + " predictions: " +
         fixed(*live.anomaly_rate, 2) + (live.degraded ? " (degraded)." : ".");
  }
  return s;
}

inline std::string forecast_template(const LiveView& live) {
  if (!live.forecast || live.forecast->forecasts.empty()) return "No production forecast is available yet.";
  const auto& f = *live.forecast;
  std::string s = "Production forecast for " + f.product_id + ": " + fixed(f.forecasts.back(), 2) + " units next period.";
  if (!f.actuals.empty()) s += " MAE " + fixed(f.mae, 2) + ", RMSE " + fixed(f.rmse, 2) + " over the evaluation window.";
  return s;
}

// Sentences of the context that share a content token with the query; the
// whole context when none do.
inline std::string relevant_sentences(const std::string& context, const std::set<std::string>& query_tokens) {
  std::string out;
  for (const auto& s : split_sentences(context)) {
    bool hit = false;
    for (const auto& t : token_set(s)) hit = hit || query_tokens.count(t);
    if (!hit) continue;
    if (!out.empty()) out.push_back(' ');
    out += s;
  }
  return out.empty() ? context : out;
}

}  // namespace detail

/// Live-status questions come from the LiveView; anything else is retrieved
/// against the index and refused when the best combined score is below the
/// refusal threshold.
inline Answer answer(std::string_view query, const InfoIndex& index, const AnswerConfig& cfg = {},
                     GeneratorClient* client = nullptr, const LiveView* live = nullptr) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Answer a;
  const auto intent = detect_live_intent(query);
  if (intent != LiveIntent::None) {
    static const LiveView empty;
    const LiveView& view = live ? *live : empty;
    a.status = AnswerStatus::Answered;
    a.generator = Generator::LiveStateTemplate;
    a.text = intent == LiveIntent::AnomalyStatus ? detail::anomaly_template(view) : detail::forecast_template(view);
  } else if (!index.contexts.empty()) {
    a.contexts = retrieve(query, index.contexts, cfg.k, cfg.alpha);
    if (!a.contexts.empty() && a.contexts.front().combined >= cfg.refusal_threshold) {
      a.status = AnswerStatus::Answered;
      std::optional<std::string> text;
      if (client) {
        GenerationRequest req{"answer", std::string(query), {}};
        for (const auto& r : a.contexts) req.contexts.push_back(index.find_context(r.chunk_id)->text);
        text = client->generate(req);
      }
      if (text) {
        a.generator = Generator::ExternalLlm;
        a.text = std::move(text);
      } else {
        a.generator = Generator::ExtractiveFallback;
        a.text = detail::relevant_sentences(index.find_context(a.contexts.front().chunk_id)->text, token_set(query));
      }
    }
  }
  a.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return a;
}

}  // namespace smartpilot::infoguide
