#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "smartpilot/errors.hpp"

namespace smartpilot::infoguide {

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Suffix stripping: ing, ed, es, s. Short words and -ss endings are left
/// alone so "press", "gas", "bus" survive.
inline std::string lemmatize(std::string w) {
  auto ends = [&](std::string_view suf) { return w.size() > suf.size() && w.ends_with(suf); };
  auto has_vowel = [&](std::size_t n) { return w.find_first_of("aeiouy") < n; };
  if (w.size() > 5 && ends("ing") && has_vowel(w.size() - 3)) {
    w.resize(w.size() - 3);
  } else if (w.size() > 4 && ends("ed") && !ends("eed") && has_vowel(w.size() - 2)) {
    w.resize(w.size() - 2);
  } else if (w.size() > 4 && (ends("ches") || ends("shes") || ends("sses") || ends("xes") || ends("zes"))) {
    w.resize(w.size() - 2);
  } else if (w.size() > 3 && ends("s") && !ends("ss") && !ends("us") && !ends("is")) {
    w.resize(w.size() - 1);
  }
  return w;
}

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> words{
      "a",     "about", "after", "all",    "also",  "am",    "an",    "and",   "any",   "are",   "as",    "at",
      "be",    "been",  "before", "being", "but",   "by",    "can",   "could", "did",   "do",    "does",  "done",
      "during", "each", "for",   "from",   "had",   "has",   "have",  "how",   "i",     "if",    "in",    "into",
      "is",    "it",    "its",   "may",    "me",    "more",  "most",  "must",  "my",    "no",    "not",   "of",
      "on",    "once",  "one",   "only",   "or",    "other", "our",   "out",   "over",  "own",   "per",   "shall",
      "should", "so",   "some",  "such",   "than",  "that",  "the",   "their", "them",  "then",  "there", "these",
      "they",  "this",  "those", "through", "to",   "too",   "under", "until", "up",    "upon",  "us",    "use",
      "used",  "very",  "was",   "we",     "were",  "what",  "when",  "where", "which", "while", "who",   "whom",
      "why",   "will",  "with",  "within", "would", "you",   "your",  "yours", "tell",  "please", "give",  "get",
      "way",   "ever",  "much",  "many",  "often", "every", "just",  "like",  "make"};
  return words;
}

/// Lowercased alphanumeric runs, lemmatized. Stopwords are kept.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(lemmatize(std::move(cur)));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c))
      cur.push_back(static_cast<char>(std::tolower(c)));
    else
      flush();
  }
  flush();
  return out;
}

/// tokenize() minus stopwords and pure numbers.
inline std::vector<std::string> content_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) {
    if (stopwords().count(t)) continue;
    if (std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) continue;
    out.push_back(std::move(t));
  }
  return out;
}

inline std::set<std::string> token_set(std::string_view text) {
  auto v = content_tokens(text);
  return {v.begin(), v.end()};
}

// ---- cleaning ------------------------------------------------------------

struct CleanConfig {
  // A line present on at least this many pages is a running header/footer.
  std::size_t repeat_pages = 3;
};

namespace detail {

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> out;
  std::size_t b = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      std::string line(s.substr(b, i - b));
      if (!line.empty() && line.back() == '\r') line.pop_back();
      out.push_back(std::move(line));
      b = i + 1;
    }
  }
  return out;
}

inline bool is_page_number(const std::string& line) {
  static const std::regex re(R"(^\s*(?:-\s*)?(?:page\s+)?\d+(?:\s*(?:of|/)\s*\d+)?(?:\s*-)?\s*$)", std::regex::icase);
  return std::regex_match(line, re);
}

// Runs of 3+ repeated decoration characters, plus stray glyphs.
inline std::string strip_symbols(const std::string& line) {
  static const std::regex runs(R"(([-=*_~#+.])\1{2,})");
  static const std::regex glyphs("(©|®|™|•|■|□|►|▪|◆|●)");
  return std::regex_replace(std::regex_replace(line, runs, " "), glyphs, " ");
}

inline std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

/// Noise removal and paragraph recovery. Pages are separated by form feeds;
/// page boundaries and blank lines end a paragraph. Removed: standalone page
/// numbers, lines repeated on >= repeat_pages pages, markdown heading lines,
/// decoration runs. Lines of one paragraph are joined with single spaces.
inline std::vector<std::string> clean_paragraphs(std::string_view doc, const CleanConfig& cfg = {}) {
  std::vector<std::vector<std::string>> pages;
  std::size_t b = 0;
  for (std::size_t i = 0; i <= doc.size(); ++i) {
    if (i == doc.size() || doc[i] == '\f') {
      pages.push_back(detail::split_lines(doc.substr(b, i - b)));
      b = i + 1;
    }
  }
  std::map<std::string, std::size_t> page_count;
  for (const auto& page : pages) {
    std::set<std::string> seen;
    for (const auto& line : page) {
      auto t = detail::collapse_spaces(line);
      if (!t.empty()) seen.insert(t);
    }
    for (const auto& t : seen) ++page_count[t];
  }

  std::vector<std::string> paragraphs;
  std::string cur;
  auto flush = [&] {
    auto p = detail::collapse_spaces(cur);
    if (!p.empty()) paragraphs.push_back(std::move(p));
    cur.clear();
  };
  for (const auto& page : pages) {
    for (const auto& raw : page) {
      const auto key = detail::collapse_spaces(raw);
      if (key.empty()) {
        flush();
        continue;
      }
      if (pages.size() >= cfg.repeat_pages && page_count[key] >= cfg.repeat_pages) continue;
      if (detail::is_page_number(key)) continue;
      if (key.front() == '#') {
        flush();
        continue;
      }
      const auto line = detail::collapse_spaces(detail::strip_symbols(key));
      if (line.empty()) continue;
      if (!cur.empty()) cur.push_back(' ');
      cur += line;
    }
    flush();
  }
  return paragraphs;
}

// ---- chunking ------------------------------------------------------------

struct ChunkConfig {
  std::size_t max_chars = 1200;
  std::size_t overlap = 100;

  void validate() const {
    if (max_chars == 0 || overlap >= max_chars) throw ConfigError("chunking needs 0 <= overlap < max_chars");
  }
};

/// One chunk per paragraph; a paragraph longer than max_chars becomes windows
/// of max_chars characters starting every (max_chars - overlap) characters,
/// the last window ending at the paragraph end.
inline std::vector<std::string> split_paragraph(const std::string& p, const ChunkConfig& cfg) {
  cfg.validate();
  if (p.size() <= cfg.max_chars) return {p};
  std::vector<std::string> out;
  const std::size_t step = cfg.max_chars - cfg.overlap;
  for (std::size_t s = 0;; s += step) {
    if (s + cfg.max_chars >= p.size()) {
      out.push_back(trim(p.substr(s)));
      break;
    }
    out.push_back(trim(p.substr(s, cfg.max_chars)));
  }
  return out;
}

/// Sentence split on . ! ? followed by whitespace or end of text.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t b = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      auto s = trim(text.substr(b, i + 1 - b));
      if (!s.empty()) out.push_back(std::move(s));
      b = i + 1;
    }
  }
  auto tail = trim(text.substr(std::min(b, text.size())));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

}  // namespace smartpilot::infoguide
