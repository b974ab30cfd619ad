#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/infoguide/text.hpp"

namespace smartpilot::infoguide {

/// Seed keywords in table order plus their synonyms. `expanded` holds every
/// seed and synonym, lowercased and trimmed, together with its lemma so that
/// tokenized text can be matched directly.
struct KeywordSet {
  std::vector<std::string> seeds;
  std::map<std::string, std::vector<std::string>> synonyms;
  std::set<std::string> expanded;

  bool contains_token(const std::string& lemma) const { return expanded.count(lemma) > 0; }

  /// Expanded keywords present in `text` (as lemmas).
  std::set<std::string> hits(std::string_view text) const {
    std::set<std::string> out;
    for (const auto& t : content_tokens(text))
      if (contains_token(t)) out.insert(t);
    return out;
  }

  /// Occurrences (not distinct) of expanded keywords in `text`.
  std::size_t hit_count(std::string_view text) const {
    std::size_t n = 0;
    for (const auto& t : content_tokens(text)) n += contains_token(t);
    return n;
  }

  friend bool operator==(const KeywordSet&, const KeywordSet&) = default;
};

inline KeywordSet make_keyword_set(const std::vector<std::pair<std::string, std::vector<std::string>>>& table) {
  KeywordSet ks;
  auto add = [&](const std::string& w) {
    const auto norm = lowercase(trim(w));
    if (norm.empty()) throw ValidationError("keyword table: empty keyword");
    ks.expanded.insert(norm);
    ks.expanded.insert(lemmatize(norm));
    return norm;
  };
  for (const auto& [seed, syns] : table) {
    const auto s = add(seed);
    if (ks.synonyms.count(s)) throw ValidationError("keyword table: duplicate seed '" + s + "'");
    ks.seeds.push_back(s);
    auto& list = ks.synonyms[s];
    for (const auto& w : syns) list.push_back(add(w));
  }
  return ks;
}

inline nlohmann::json to_json(const KeywordSet& ks) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : ks.seeds) rows.push_back({{"seed", s}, {"synonyms", ks.synonyms.at(s)}});
  return {{"format", "smartpilot-keywords"}, {"keywords", rows}};
}

inline KeywordSet keyword_set_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "smartpilot-keywords" || !j.contains("keywords") ||
      !j["keywords"].is_array())
    throw ValidationError("keyword table: expected {format: smartpilot-keywords, keywords: [...]}");
  std::vector<std::pair<std::string, std::vector<std::string>>> table;
  for (const auto& row : j["keywords"]) {
    if (!row.contains("seed") || !row["seed"].is_string())
      throw ValidationError("keyword table: every row needs a string 'seed'");
    std::vector<std::string> syns;
    if (row.contains("synonyms")) syns = row["synonyms"].get<std::vector<std::string>>();
    table.emplace_back(row["seed"].get<std::string>(), std::move(syns));
  }
  return make_keyword_set(table);
}

inline KeywordSet load_keywords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing keyword table " + path);
  try {
    return keyword_set_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

/// The eight seeds and the synonym table shipped in data/keywords.json.
inline KeywordSet default_keywords() {
  return make_keyword_set({
      {"safety", {"protection", "safeguard", "lockout", "guarding"}},
      {"maintenance", {"servicing", "upkeep", "repair", "lubrication", "service"}},
      {"operation", {"operating", "procedure", "startup", "running"}},
      {"installation", {"install", "setup", "mounting", "commissioning"}},
      {"inspection", {"inspect", "examination", "audit", "checkup"}},
      {"warning", {"alert", "alarm", "notice"}},
      {"danger", {"hazard", "hazardous", "risk", "peril"}},
      {"caution", {"precaution", "care", "careful", "attention"}},
  });
}

}  // namespace smartpilot::infoguide
