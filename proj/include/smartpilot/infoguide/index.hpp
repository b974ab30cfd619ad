#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/infoguide/client.hpp"
#include "smartpilot/infoguide/keywords.hpp"
#include "smartpilot/infoguide/text.hpp"
#include "smartpilot/kernel/rng.hpp"

namespace smartpilot::infoguide {

inline constexpr std::size_t kEmbeddingDim = 256;

/// Hashed term frequency over content tokens, L2-normalized. All-zero when
/// the text has no content tokens.
inline std::vector<double> embed(std::string_view text, std::size_t dim = kEmbeddingDim) {
  std::vector<double> v(dim, 0.0);
  for (const auto& t : content_tokens(text)) v[kernel::fnv1a(t) % dim] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
  }
  return v;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionError("cosine: embedding sizes differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

struct Chunk {
  std::string chunk_id;
  std::string text;
  std::string source_doc;
  std::set<std::string> keywords_hit;
  std::vector<double> embedding;
  std::set<std::string> tokens;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

inline Chunk make_chunk(std::string id, std::string text, std::string source, const KeywordSet& keywords) {
  Chunk c;
  c.chunk_id = std::move(id);
  c.source_doc = std::move(source);
  c.keywords_hit = keywords.hits(text);
  c.embedding = embed(text);
  c.tokens = token_set(text);
  c.text = std::move(text);
  return c;
}

inline std::string chunk_id(const std::string& doc, std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%03zu", n);
  return doc + buf;
}

/// Clean, split into paragraphs, chunk, embed. Chunk ids are
/// "<source_doc>#<nnn>" numbered in document order.
inline std::vector<Chunk> ingest_manual(std::string_view doc, const std::string& source_doc, const KeywordSet& keywords,
                                        const ChunkConfig& chunk_cfg = {}, const CleanConfig& clean_cfg = {}) {
  chunk_cfg.validate();
  const auto paragraphs = clean_paragraphs(doc, clean_cfg);
  if (paragraphs.empty()) throw IngestionError("manual '" + source_doc + "' is empty after cleaning");
  std::vector<Chunk> out;
  for (const auto& p : paragraphs)
    for (auto& piece : split_paragraph(p, chunk_cfg))
      out.push_back(make_chunk(chunk_id(source_doc, out.size()), std::move(piece), source_doc, keywords));
  return out;
}

/// Largest cosine between the chunk and any single expanded keyword.
inline double keyword_score(const Chunk& c, const KeywordSet& keywords) {
  std::set<std::string> lemmas;
  for (const auto& k : keywords.expanded)
    for (auto& t : content_tokens(k)) lemmas.insert(std::move(t));
  double best = 0.0;
  for (const auto& k : lemmas) best = std::max(best, cosine(c.embedding, embed(k)));
  return best;
}

struct ScoredChunk {
  Chunk chunk;
  double score = 0.0;
};

/// Chunks whose keyword_score >= threshold, by score descending then chunk id.
inline std::vector<ScoredChunk> select_relevant_chunks(const std::vector<Chunk>& chunks, const KeywordSet& keywords,
                                                       double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("selection threshold must lie in [0, 1]");
  std::vector<ScoredChunk> out;
  for (const auto& c : chunks) {
    const double s = keyword_score(c, keywords);
    if (s >= threshold) out.push_back({c, s});
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk.chunk_id < b.chunk.chunk_id;
  });
  return out;
}

// ---- summarization -------------------------------------------------------

enum class Generator { ExternalLlm, ExtractiveFallback, LiveStateTemplate };

inline const char* to_string(Generator g) {
  switch (g) {
    case Generator::ExternalLlm: return "external_llm";
    case Generator::ExtractiveFallback: return "extractive_fallback";
    case Generator::LiveStateTemplate: return "live_state_template";
  }
  return "?";
}

struct SummaryConfig {
  std::size_t sentences_per_chunk = 2;
};

struct Summary {
  std::string text;
  Generator generator = Generator::ExtractiveFallback;
  std::optional<std::string> warning;
};

/// Extractive summary of one chunk: the top-N sentences by keyword hits
/// (ties: earlier first), re-emitted in document order.
inline std::string extract_sentences(const std::string& text, const KeywordSet& keywords, std::size_t n) {
  const auto sentences = split_sentences(text);
  std::vector<std::size_t> order(sentences.size());
  std::vector<std::size_t> hits(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    order[i] = i;
    hits[i] = keywords.hit_count(sentences[i]);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return hits[a] > hits[b]; });
  order.resize(std::min(n, order.size()));
  std::sort(order.begin(), order.end());
  std::string out;
  for (auto i : order) {
    if (!out.empty()) out.push_back(' ');
    out += sentences[i];
  }
  return out;
}

/// Summary of a chunk list: the external client's text when it answers,
/// otherwise the per-chunk extractive summaries joined in input order.
inline Summary summarize(const std::vector<Chunk>& chunks, const KeywordSet& keywords, const SummaryConfig& cfg = {},
                         GeneratorClient* client = nullptr) {
  if (chunks.empty()) throw InputError("summarize: no chunks");
  Summary s;
  if (client) {
    GenerationRequest req{"summarize", "", {}};
    for (const auto& c : chunks) req.contexts.push_back(c.text);
    if (auto text = client->generate(req)) {
      s.text = std::move(*text);
      s.generator = Generator::ExternalLlm;
      return s;
    }
    s.warning = "generator client unavailable; used extractive summary";
  }
  for (const auto& c : chunks) {
    const auto part = extract_sentences(c.text, keywords, cfg.sentences_per_chunk);
    if (part.empty()) continue;
    if (!s.text.empty()) s.text.push_back(' ');
    s.text += part;
  }
  return s;
}

// ---- retrieval -----------------------------------------------------------

struct RetrievalResult {
  std::string chunk_id;
  double neural_score = 0.0;
  double symbolic_score = 0.0;
  double combined = 0.0;
};

inline nlohmann::json to_json(const RetrievalResult& r) {
  return {{"chunk_id", r.chunk_id},
          {"neural_score", r.neural_score},
          {"symbolic_score", r.symbolic_score},
          {"combined", r.combined}};
}

/// Top-k by alpha * cosine + (1 - alpha) * jaccard; ties by chunk id.
inline std::vector<RetrievalResult> retrieve(std::string_view query, const std::vector<Chunk>& index, std::size_t k,
                                             double alpha) {
  if (k == 0) throw ConfigError("retrieve: k must be at least 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("retrieve: alpha must lie in [0, 1]");
  const auto q = embed(query);
  const auto qt = token_set(query);
  std::vector<RetrievalResult> all;
  all.reserve(index.size());
  for (const auto& c : index) {
    RetrievalResult r;
    r.chunk_id = c.chunk_id;
    r.neural_score = cosine(q, c.embedding);
    r.symbolic_score = jaccard(qt, c.tokens);
    r.combined = alpha * r.neural_score + (1.0 - alpha) * r.symbolic_score;
    all.push_back(std::move(r));
  }
  std::sort(all.begin(), all.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    return a.chunk_id < b.chunk_id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// ---- index build ---------------------------------------------------------

struct IndexConfig {
  ChunkConfig chunking;
  CleanConfig cleaning;
  SummaryConfig summary;
  double selection_threshold = 0.35;
};

struct ManualText {
  std::string name;
  std::string text;
};

/// Query-time index: one context document per selected chunk, holding that
/// chunk's summary and keeping its chunk id.
struct InfoIndex {
  std::vector<Chunk> chunks;    // every ingested chunk
  std::vector<Chunk> contexts;  // summarized, selected chunks
  std::vector<std::string> warnings;

  const Chunk* find_context(const std::string& id) const {
    for (const auto& c : contexts)
      if (c.chunk_id == id) return &c;
    return nullptr;
  }
};

inline InfoIndex build_index(const std::vector<ManualText>& manuals, const KeywordSet& keywords,
                             const IndexConfig& cfg = {}, GeneratorClient* client = nullptr) {
  InfoIndex idx;
  for (const auto& m : manuals) {
    auto chunks = ingest_manual(m.text, m.name, keywords, cfg.chunking, cfg.cleaning);
    idx.chunks.insert(idx.chunks.end(), std::make_move_iterator(chunks.begin()), std::make_move_iterator(chunks.end()));
  }
  auto selected = select_relevant_chunks(idx.chunks, keywords, cfg.selection_threshold);
  std::sort(selected.begin(), selected.end(),
            [](const ScoredChunk& a, const ScoredChunk& b) { return a.chunk.chunk_id < b.chunk.chunk_id; });
  for (const auto& sc : selected) {
    auto s = summarize({sc.chunk}, keywords, cfg.summary, client);
    if (s.warning && idx.warnings.empty()) idx.warnings.push_back(*s.warning);
    idx.contexts.push_back(make_chunk(sc.chunk.chunk_id, std::move(s.text), sc.chunk.source_doc, keywords));
  }
  return idx;
}

/// Every *.txt / *.md file in `dir`, sorted by file name; the manual name is
/// the file stem.
inline std::vector<ManualText> read_manuals(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("manuals directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".txt" || ext == ".md")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ManualText> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out.push_back({f.stem().string(), ss.str()});
  }
  if (out.empty()) throw InputError("no manuals (*.txt, *.md) in " + dir.string());
  return out;
}

}  // namespace smartpilot::infoguide
