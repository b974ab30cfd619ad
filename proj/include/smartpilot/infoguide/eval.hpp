#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/infoguide/answer.hpp"

namespace smartpilot::infoguide {

struct GoldItem {
  std::string question;
  std::string chunk_id;
};

struct RetrievalEval {
  std::size_t questions = 0;
  std::size_t top_k_hits = 0;
  std::size_t answered = 0;     // gold questions not refused
  std::size_t ood = 0;
  std::size_t ood_refused = 0;
  double mean_latency_ms = 0.0;
  double max_latency_ms = 0.0;
  std::vector<std::string> misses;

  double hit_rate() const { return questions ? static_cast<double>(top_k_hits) / static_cast<double>(questions) : 0.0; }
  double refusal_rate() const { return ood ? static_cast<double>(ood_refused) / static_cast<double>(ood) : 0.0; }
};

/// Gold questions: hit when the gold chunk is among the answer's contexts.
/// Out-of-domain questions: counted when refused.
inline RetrievalEval evaluate_retrieval(const InfoIndex& index, const std::vector<GoldItem>& gold,
                                        const std::vector<std::string>& ood, const AnswerConfig& cfg = {},
                                        GeneratorClient* client = nullptr) {
  RetrievalEval r;
  double total = 0.0;
  auto timed = [&](const std::string& q) {
    const auto start = std::chrono::steady_clock::now();
    auto a = answer(q, index, cfg, client);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    total += ms;
    r.max_latency_ms = std::max(r.max_latency_ms, ms);
    return a;
  };
  for (const auto& g : gold) {
    ++r.questions;
    const auto a = timed(g.question);
    // Refusal still reports the contexts it considered, so retrieval is
    // scored separately from the refusal decision.
    const auto ranked = retrieve(g.question, index.contexts, cfg.k, cfg.alpha);
    const bool hit = std::any_of(ranked.begin(), ranked.end(), [&](const auto& c) { return c.chunk_id == g.chunk_id; });
    r.top_k_hits += hit;
    r.answered += a.status == AnswerStatus::Answered;
    if (!hit) r.misses.push_back(g.question);
  }
  for (const auto& q : ood) {
    ++r.ood;
    r.ood_refused += timed(q).status == AnswerStatus::Refused;
  }
  const auto n = r.questions + r.ood;
  r.mean_latency_ms = n ? total / static_cast<double>(n) : 0.0;
  return r;
}

inline nlohmann::json to_json(const RetrievalEval& r) {
  return {{"questions", r.questions},     {"top_k_hits", r.top_k_hits},     {"hit_rate", r.hit_rate()},
          {"answered", r.answered},       {"out_of_domain", r.ood},         {"refused", r.ood_refused},
          {"refusal_rate", r.refusal_rate()}, {"mean_latency_ms", r.mean_latency_ms},
          {"max_latency_ms", r.max_latency_ms}, {"misses", r.misses}};
}

/// Reads questions.json as written by the corpus generator.
inline void read_questions(const std::filesystem::path& path, std::vector<GoldItem>& gold, std::vector<std::string>& ood) {
  std::ifstream in(path);
  if (!in) throw InputError("missing " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& q : j.at("questions")) gold.push_back({q.at("question"), q.at("chunk_id")});
    ood = j.value("out_of_domain", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace smartpilot::infoguide
