#include <gtest/gtest.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <thread>

#include "smartpilot/datagen/corpus.hpp"
#include "smartpilot/infoguide/answer.hpp"

using namespace smartpilot;
using namespace smartpilot::infoguide;

namespace {

const KeywordSet& kw() {
  static const KeywordSet k = default_keywords();
  return k;
}

class FixedClient : public GeneratorClient {
 public:
  explicit FixedClient(std::optional<std::string> reply) : reply_(std::move(reply)) {}
  std::optional<std::string> generate(const GenerationRequest& req) override {
    last = req;
    ++calls;
    return reply_;
  }
  GenerationRequest last;
  int calls = 0;

 private:
  std::optional<std::string> reply_;
};

// Independent chunk-count rule: ceil over the stepped windows.
std::size_t expected_pieces(std::size_t len, std::size_t max, std::size_t overlap) {
  if (len <= max) return 1;
  const std::size_t step = max - overlap;
  return 1 + (len - max + step - 1) / step;
}

}  // namespace

TEST(Text, Lemmatizer) {
  EXPECT_EQ(lemmatize("warnings"), "warning");
  EXPECT_EQ(lemmatize("inspecting"), "inspect");
  EXPECT_EQ(lemmatize("calibrated"), "calibrat");
  EXPECT_EQ(lemmatize("boxes"), "box");
  EXPECT_EQ(lemmatize("press"), "press");
  EXPECT_EQ(lemmatize("status"), "status");
  EXPECT_EQ(lemmatize("speed"), "speed");
  EXPECT_EQ(lemmatize("string"), "string");
  EXPECT_EQ(content_tokens("How do I inspect the Sensors?"), (std::vector<std::string>{"inspect", "sensor"}));
}

TEST(Keywords, SeedsInsideExpansion) {
  const auto& k = kw();
  ASSERT_EQ(k.seeds.size(), 8u);
  for (const auto& s : k.seeds) EXPECT_TRUE(k.expanded.count(s)) << s;
  for (const auto& w : k.expanded) EXPECT_EQ(w, lowercase(trim(w)));
  EXPECT_TRUE(k.contains_token(lemmatize("warnings")));
}

TEST(Keywords, ShippedTableMatchesDefaults) {
  EXPECT_EQ(load_keywords(std::string(SMARTPILOT_DATA_DIR) + "/keywords.json"), default_keywords());
  EXPECT_EQ(keyword_set_from_json(to_json(kw())), kw());
  EXPECT_THROW(keyword_set_from_json(nlohmann::json{{"keywords", 3}}), ValidationError);
  EXPECT_THROW(make_keyword_set({{"a", {}}, {"A ", {}}}), ValidationError);
}

TEST(Ingest, SingleParagraph) {
  std::string p = "The conveyor must be stopped before any adjustment.";
  while (p.size() < 200) p += " Keep hands clear of rollers.";
  const auto chunks = ingest_manual(p, "m", kw());
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].text, p);
  EXPECT_EQ(chunks[0].chunk_id, "m#000");
  EXPECT_EQ(chunks[0].source_doc, "m");
}

TEST(Ingest, PageNumbersAndDecorationRemoved) {
  const std::string doc =
      "Alpha paragraph text.\n\nPage 7\n\n   12   \n- 3 -\nPage 2 of 9\n*****\nBeta ===== text\n\n# Title line\nGamma.";
  const auto paragraphs = clean_paragraphs(doc);
  EXPECT_EQ(paragraphs, (std::vector<std::string>{"Alpha paragraph text.", "Beta text", "Gamma."}));
  for (const auto& c : ingest_manual(doc, "m", kw())) EXPECT_EQ(c.text.find("Page 7"), std::string::npos);
}

TEST(Ingest, RepeatedHeadersRemovedFromThreePages) {
  std::string three, two;
  for (int pg = 0; pg < 3; ++pg) {
    three += (pg ? "\f" : "") + std::string("ACME Handbook\nBody ") + std::to_string(pg) + ".\nConfidential\n";
    if (pg < 2) two += (pg ? "\f" : "") + std::string("ACME Handbook\nBody ") + std::to_string(pg) + ".\n";
  }
  EXPECT_EQ(clean_paragraphs(three), (std::vector<std::string>{"Body 0.", "Body 1.", "Body 2."}));
  EXPECT_EQ(clean_paragraphs(two), (std::vector<std::string>{"ACME Handbook Body 0.", "ACME Handbook Body 1."}));
}

TEST(Ingest, EmptyAfterCleaningIsAnError) {
  EXPECT_THROW(ingest_manual("Page 1\n\f\n=====\n", "m", kw()), IngestionError);
  EXPECT_THROW(ingest_manual("", "m", kw()), IngestionError);
}

TEST(Ingest, SplitCountMatchesIndependentRule) {
  kernel::CounterRng rng(5, "test/chunks");
  ChunkConfig cfg;
  cfg.max_chars = 300;
  cfg.overlap = 100;
  std::string doc;
  std::size_t expected = 0;
  std::vector<std::size_t> lengths;
  for (int pg = 0; pg < 3; ++pg) {
    if (pg) doc += "\f";
    for (int p = 0; p < 4; ++p) {
      std::string para;
      const std::size_t words = 10 + rng.below(120);
      for (std::size_t w = 0; w < words; ++w) para += (w ? " " : "") + std::string("word") + std::to_string(rng.below(50));
      doc += para + "\n\n";
      expected += expected_pieces(para.size(), cfg.max_chars, cfg.overlap);
      lengths.push_back(para.size());
    }
  }
  const auto chunks = ingest_manual(doc, "m", kw(), cfg);
  EXPECT_EQ(chunks.size(), expected);
  for (const auto& c : chunks) EXPECT_LE(c.text.size(), cfg.max_chars);
  const auto pieces = split_paragraph(std::string(1000, 'x'), cfg);
  ASSERT_EQ(pieces.size(), 5u);
  EXPECT_EQ(pieces[1].size(), 300u);
  EXPECT_EQ(pieces.back().size(), 200u);  // starts at 800
}

TEST(Embedding, UnitOrZeroNorm) {
  for (const char* t : {"safety first", "the of and", "", "Gripper jaw calibration safety"}) {
    const auto e = embed(t);
    double n = 0.0;
    for (double x : e) n += x * x;
    n = std::sqrt(n);
    EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) < 1e-9) << t;
  }
  EXPECT_EQ(embed("the of and"), std::vector<double>(kEmbeddingDim, 0.0));
}

TEST(Select, ExactKeywordAndDisjointText) {
  const auto kc = make_chunk("a", "safety", "d", kw());
  EXPECT_DOUBLE_EQ(keyword_score(kc, kw()), 1.0);
  EXPECT_EQ(select_relevant_chunks({kc}, kw(), 1.0).size(), 1u);
  // Words whose hash buckets miss every keyword bucket.
  std::set<std::size_t> buckets;
  for (const auto& k : kw().expanded)
    for (const auto& t : content_tokens(k)) buckets.insert(kernel::fnv1a(t) % kEmbeddingDim);
  std::string text;
  for (const char* w : {"colour", "freight", "quote", "sales", "office", "crate", "invoice", "ledger", "parcel"})
    if (!buckets.count(kernel::fnv1a(lemmatize(w)) % kEmbeddingDim)) text += std::string(w) + " ";
  ASSERT_FALSE(text.empty());
  const auto other = make_chunk("b", text, "d", kw());
  EXPECT_EQ(keyword_score(other, kw()), 0.0);
  EXPECT_TRUE(select_relevant_chunks({other}, kw(), 0.35).empty());
}

TEST(Select, OrderedByScoreThenId) {
  const std::vector<Chunk> chunks{make_chunk("c", "safety", "d", kw()), make_chunk("a", "danger", "d", kw()),
                                  make_chunk("b", "danger risk gripper", "d", kw())};
  const auto sel = select_relevant_chunks(chunks, kw(), 0.0);
  ASSERT_EQ(sel.size(), 3u);
  EXPECT_EQ(sel[0].chunk.chunk_id, "a");
  EXPECT_EQ(sel[1].chunk.chunk_id, "c");
  EXPECT_EQ(sel[2].chunk.chunk_id, "b");
}

TEST(Select, DefaultThresholdMaximizesF1OnCorpus) {
  const auto corpus = datagen::gen_corpus({});
  std::vector<Chunk> chunks;
  for (const auto& m : corpus.manuals) {
    auto c = ingest_manual(m.text, m.name, corpus.keywords);
    chunks.insert(chunks.end(), c.begin(), c.end());
  }
  auto f1_at = [&](double th) {
    std::size_t tp = 0, sel = 0;
    for (const auto& s : select_relevant_chunks(chunks, corpus.keywords, th)) {
      ++sel;
      tp += corpus.relevant_chunk_ids.count(s.chunk.chunk_id);
    }
    const double p = sel ? double(tp) / double(sel) : 0.0;
    const double r = double(tp) / double(corpus.relevant_chunk_ids.size());
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  };
  double best = 0.0;
  for (int i = 1; i <= 19; ++i) best = std::max(best, f1_at(0.05 * i));
  EXPECT_EQ(f1_at(IndexConfig{}.selection_threshold), best);
  EXPECT_EQ(best, 1.0);
}

TEST(Summarize, SingleSentenceVerbatim) {
  const auto c = make_chunk("a", "Tighten the belt to the mark.", "d", kw());
  const auto s = summarize({c}, kw());
  EXPECT_EQ(s.text, "Tighten the belt to the mark.");
  EXPECT_EQ(s.generator, Generator::ExtractiveFallback);
}

TEST(Summarize, KeywordSentenceRankedFirst) {
  const auto c = make_chunk("a", "Open the cover. Wear gloves for safety.", "d", kw());
  SummaryConfig one;
  one.sentences_per_chunk = 1;
  EXPECT_EQ(summarize({c}, kw(), one).text, "Wear gloves for safety.");
  EXPECT_EQ(summarize({c}, kw()).text, "Open the cover. Wear gloves for safety.");
}

TEST(Summarize, MatchesRuleReimplementationOnCorpus) {
  const auto corpus = datagen::gen_corpus({});
  std::vector<Chunk> chunks;
  for (const auto& m : corpus.manuals) {
    auto c = ingest_manual(m.text, m.name, corpus.keywords);
    chunks.insert(chunks.end(), c.begin(), c.end());
  }
  chunks.resize(20);
  // Oracle: score every sentence, pick the n best with a full sort on
  // (hits desc, position asc), then restore position order.
  std::string expected;
  for (const auto& c : chunks) {
    const auto sents = split_sentences(c.text);
    std::vector<std::pair<long, std::size_t>> ranked;
    for (std::size_t i = 0; i < sents.size(); ++i) {
      long hits = 0;
      for (const auto& t : content_tokens(sents[i])) hits += corpus.keywords.expanded.count(t) ? 1 : 0;
      ranked.push_back({-hits, i});
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < std::min<std::size_t>(2, ranked.size()); ++i) keep.push_back(ranked[i].second);
    std::sort(keep.begin(), keep.end());
    for (auto i : keep) expected += (expected.empty() ? "" : " ") + sents[i];
  }
  EXPECT_EQ(summarize(chunks, corpus.keywords).text, expected);
}

TEST(Summarize, ExternalClientAndFallback) {
  const auto c = make_chunk("a", "Wear gloves for safety.", "d", kw());
  FixedClient ok(std::string("short summary"));
  auto s = summarize({c}, kw(), {}, &ok);
  EXPECT_EQ(s.text, "short summary");
  EXPECT_EQ(s.generator, Generator::ExternalLlm);
  EXPECT_EQ(ok.last.template_id, "summarize");
  FixedClient down(std::nullopt);
  s = summarize({c}, kw(), {}, &down);
  EXPECT_EQ(s.generator, Generator::ExtractiveFallback);
  EXPECT_TRUE(s.warning.has_value());
  EXPECT_EQ(s.text, "Wear gloves for safety.");
  EXPECT_THROW(summarize({}, kw()), InputError);
}

TEST(Retrieve, JaccardIdentityAndDisjoint) {
  EXPECT_EQ(jaccard({"a", "b"}, {"a", "b"}), 1.0);
  EXPECT_EQ(jaccard({"a", "b"}, {"c", "d"}), 0.0);
  const std::vector<Chunk> idx{make_chunk("x", "gripper torque", "d", kw()), make_chunk("y", "belt roller", "d", kw())};
  auto r = retrieve("gripper torque", idx, 2, 0.0);
  EXPECT_EQ(r[0].chunk_id, "x");
  EXPECT_EQ(r[0].symbolic_score, 1.0);
  EXPECT_EQ(r[1].symbolic_score, 0.0);
  EXPECT_DOUBLE_EQ(r[0].neural_score, 1.0);
}

TEST(Retrieve, ConvexEndpointsMatchSingleMeasureRankings) {
  const auto corpus = datagen::gen_corpus({});
  const auto index = build_index(corpus.manuals, corpus.keywords);
  const auto& ctx = index.contexts;
  for (const auto& q : corpus.questions) {
    const auto qe = embed(q.question);
    const auto qt = token_set(q.question);
    std::vector<std::pair<double, std::string>> cos, jac;
    for (const auto& c : ctx) {
      cos.push_back({-cosine(qe, c.embedding), c.chunk_id});
      jac.push_back({-jaccard(qt, c.tokens), c.chunk_id});
    }
    std::sort(cos.begin(), cos.end());
    std::sort(jac.begin(), jac.end());
    const auto r1 = retrieve(q.question, ctx, ctx.size(), 1.0);
    const auto r0 = retrieve(q.question, ctx, ctx.size(), 0.0);
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      ASSERT_EQ(r1[i].chunk_id, cos[i].second);
      ASSERT_EQ(r0[i].chunk_id, jac[i].second);
    }
    const auto mid = retrieve(q.question, ctx, 3, 0.7);
    for (const auto& r : mid) EXPECT_DOUBLE_EQ(r.combined, 0.7 * r.neural_score + 0.3 * r.symbolic_score);
  }
}

TEST(Retrieve, PureAndEdgeCases) {
  const auto corpus = datagen::gen_corpus({});
  const auto index = build_index(corpus.manuals, corpus.keywords);
  const auto a = retrieve("tension the drive belt", index.contexts, 3, 0.7);
  const auto b = retrieve("tension the drive belt", index.contexts, 3, 0.7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].chunk_id, b[i].chunk_id);
  EXPECT_TRUE(retrieve("anything", {}, 3, 0.7).empty());
  EXPECT_THROW(retrieve("x", index.contexts, 0, 0.7), ConfigError);
  EXPECT_THROW(retrieve("x", index.contexts, 3, 1.5), ConfigError);
}

TEST(Retrieve, GoldQuestionsTopThree) {
  const auto corpus = datagen::gen_corpus({});
  const auto index = build_index(corpus.manuals, corpus.keywords);
  std::size_t hits = 0;
  for (const auto& q : corpus.questions)
    for (const auto& r : retrieve(q.question, index.contexts, 3, 0.7)) hits += r.chunk_id == q.chunk_id;
  EXPECT_GE(hits, 17u);
}

TEST(Answer, GibberishRefused) {
  const auto corpus = datagen::gen_corpus({});
  const auto index = build_index(corpus.manuals, corpus.keywords);
  const auto a = answer("zq xv qqq", index);
  EXPECT_EQ(a.status, AnswerStatus::Refused);
  EXPECT_FALSE(a.text.has_value());
  for (const auto& r : a.contexts) EXPECT_LT(r.combined, AnswerConfig{}.refusal_threshold);
}

TEST(Answer, LiveStatusFromTemplate) {
  LiveView live;
  predictx::PredictionResult p;
  p.id = 17;
  p.state_id = "S03";
  p.predicted_class = predictx::AnomalyClass::NoNose;
  p.class_probs[predictx::index_of(p.predicted_class)] = 0.9;
  ontology::Explanation ex;
  ex.responsible_variables.push_back({"Potentiometer_R1", 5.0, 1.0, 2.0});
  p.explanation = ex;
  live.prediction = p;
  live.anomaly_rate = 0.4;
  live.insight_window = 10;
  live.degraded = true;
  const auto a = answer("what is the current anomaly status", InfoIndex{}, {}, nullptr, &live);
  EXPECT_EQ(a.status, AnswerStatus::Answered);
  EXPECT_EQ(a.generator, Generator::LiveStateTemplate);
  EXPECT_NE(a.text->find("NoNose"), std::string::npos);
  EXPECT_NE(a.text->find("Potentiometer_R1"), std::string::npos);
  EXPECT_NE(a.text->find("degraded"), std::string::npos);
  EXPECT_TRUE(a.contexts.empty());

  const auto none = answer("what is the current anomaly status", InfoIndex{});
  EXPECT_EQ(none.generator, Generator::LiveStateTemplate);
  EXPECT_NE(none.text->find("No anomaly prediction"), std::string::npos);

  foresight::ForecastResult f;
  f.product_id = "Yeast-BRD";
  f.forecasts = {41.5};
  live.forecast = f;
  const auto fa = answer("What is the production forecast for next period?", InfoIndex{}, {}, nullptr, &live);
  EXPECT_EQ(fa.generator, Generator::LiveStateTemplate);
  EXPECT_NE(fa.text->find("Yeast-BRD"), std::string::npos);
  EXPECT_NE(fa.text->find("41.50"), std::string::npos);
}

TEST(Answer, IntentPatterns) {
  EXPECT_EQ(detect_live_intent("Any anomalies right now?"), LiveIntent::AnomalyStatus);
  EXPECT_EQ(detect_live_intent("show the latest forecast"), LiveIntent::ProductionForecast);
  EXPECT_EQ(detect_live_intent("expected production output"), LiveIntent::ProductionForecast);
  EXPECT_EQ(detect_live_intent("How do I tension the drive belt?"), LiveIntent::None);
  EXPECT_EQ(detect_live_intent("what causes an anomaly"), LiveIntent::None);
}

TEST(Answer, EmptyIndexRefuses) {
  const auto a = answer("How do I tension the drive belt?", InfoIndex{});
  EXPECT_EQ(a.status, AnswerStatus::Refused);
  EXPECT_TRUE(a.contexts.empty());
}

TEST(Answer, RefusalSoundnessAndFallback) {
  const auto corpus = datagen::gen_corpus({});
  const auto index = build_index(corpus.manuals, corpus.keywords);
  const double tau = AnswerConfig{}.refusal_threshold;
  std::vector<std::string> queries;
  for (const auto& q : corpus.questions) queries.push_back(q.question);
  queries.insert(queries.end(), corpus.ood_questions.begin(), corpus.ood_questions.end());
  std::size_t refused_ood = 0;
  for (const auto& q : queries) {
    const auto a = answer(q, index);
    const double best = a.contexts.empty() ? 0.0 : a.contexts.front().combined;
    EXPECT_EQ(a.status == AnswerStatus::Refused, best < tau) << q;
    if (a.status == AnswerStatus::Answered) {
      EXPECT_GE(a.contexts.size(), 1u);
      EXPECT_EQ(a.generator, Generator::ExtractiveFallback);
      EXPECT_FALSE(a.text->empty());
    }
  }
  for (const auto& q : corpus.ood_questions) refused_ood += answer(q, index).status == AnswerStatus::Refused;
  EXPECT_GE(refused_ood, 9u);

  FixedClient down(std::nullopt);
  const auto a = answer(corpus.questions[0].question, index, {}, &down);
  EXPECT_EQ(a.status, AnswerStatus::Answered);
  EXPECT_EQ(a.generator, Generator::ExtractiveFallback);
  EXPECT_EQ(down.calls, 1);
  EXPECT_EQ(down.last.template_id, "answer");
  EXPECT_EQ(down.last.contexts.size(), 3u);

  FixedClient up(std::string("generated"));
  const auto b = answer(corpus.questions[0].question, index, {}, &up);
  EXPECT_EQ(b.generator, Generator::ExternalLlm);
  EXPECT_EQ(*b.text, "generated");
}

TEST(Clients, HttpProtocol) {
  httplib::Server svr;
  std::string seen;
  svr.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    seen = req.body;
    res.set_content(R"({"text":"from http"})", "application/json");
  });
  const int port = svr.bind_to_any_port("127.0.0.1");
  std::thread th([&] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  HttpGeneratorClient client("127.0.0.1", port);
  EXPECT_EQ(client.generate({"answer", "q", {"c1", "c2"}}), std::optional<std::string>("from http"));
  const auto j = nlohmann::json::parse(seen);
  EXPECT_EQ(j["template_id"], "answer");
  EXPECT_EQ(j["query"], "q");
  EXPECT_EQ(j["contexts"].size(), 2u);
  svr.stop();
  th.join();
  HttpGeneratorClient dead("127.0.0.1", port, "/generate", std::chrono::milliseconds(200));
  EXPECT_FALSE(dead.generate({"answer", "q", {}}).has_value());
}

TEST(Clients, LineSocketProtocol) {
  const int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  ASSERT_EQ(::listen(lfd, 1), 0);
  socklen_t len = sizeof addr;
  ::getsockname(lfd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  std::string got;
  std::thread th([&] {
    const int fd = ::accept(lfd, nullptr, nullptr);
    char buf[1024];
    while (got.find('\n') == std::string::npos) {
      const auto n = ::recv(fd, buf, sizeof buf, 0);
      if (n <= 0) break;
      got.append(buf, static_cast<std::size_t>(n));
    }
    const std::string reply = "{\"text\":\"from socket\"}\n";
    ::send(fd, reply.data(), reply.size(), 0);
    ::close(fd);
  });
  LineSocketGeneratorClient client("127.0.0.1", port);
  EXPECT_EQ(client.generate({"summarize", "", {"c"}}), std::optional<std::string>("from socket"));
  th.join();
  ::close(lfd);
  EXPECT_EQ(nlohmann::json::parse(got.substr(0, got.find('\n')))["template_id"], "summarize");
  LineSocketGeneratorClient dead("127.0.0.1", port, std::chrono::milliseconds(200));
  EXPECT_FALSE(dead.generate({"answer", "q", {}}).has_value());
}

TEST(Corpus, ShapeAndGoldContainsQuestionTokens) {
  const auto c = datagen::gen_corpus({});
  EXPECT_GE(c.manuals.size(), 3u);
  std::size_t paragraphs = 0;
  std::map<std::string, Chunk> by_id;
  for (const auto& m : c.manuals) {
    paragraphs += clean_paragraphs(m.text).size();
    for (auto& ch : ingest_manual(m.text, m.name, c.keywords)) by_id.emplace(ch.chunk_id, ch);
  }
  EXPECT_GE(paragraphs, 30u);
  ASSERT_EQ(c.questions.size(), 20u);
  ASSERT_EQ(c.ood_questions.size(), 10u);
  for (const auto& q : c.questions) {
    ASSERT_TRUE(by_id.count(q.chunk_id)) << q.chunk_id;
    std::size_t shared = 0;
    for (const auto& t : token_set(q.question)) shared += by_id[q.chunk_id].tokens.count(t);
    EXPECT_GE(shared, 1u) << q.question;
    EXPECT_EQ(detect_live_intent(q.question), LiveIntent::None);
  }
}

TEST(Corpus, OutOfDomainVocabularyDisjoint) {
  const auto c = datagen::gen_corpus({});
  std::set<std::string> vocab;
  for (const auto& m : c.manuals)
    for (const auto& t : content_tokens(m.text)) vocab.insert(t);
  for (const auto& q : c.ood_questions) {
    const auto qt = token_set(q);
    EXPECT_FALSE(qt.empty());
    for (const auto& t : qt) EXPECT_EQ(vocab.count(t), 0u) << q << ": " << t;
    EXPECT_EQ(detect_live_intent(q), LiveIntent::None);
  }
}

TEST(Corpus, DeterministicFiles) {
  const auto tmp = std::filesystem::temp_directory_path();
  datagen::write_corpus(datagen::gen_corpus({}), tmp / "sp_corpus_a");
  datagen::write_corpus(datagen::gen_corpus({}), tmp / "sp_corpus_b");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  for (const auto& e : std::filesystem::recursive_directory_iterator(tmp / "sp_corpus_a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), tmp / "sp_corpus_a");
    EXPECT_EQ(slurp(e.path()), slurp(tmp / "sp_corpus_b" / rel)) << rel;
  }
  EXPECT_EQ(read_manuals(tmp / "sp_corpus_a" / "manuals").size(), 4u);
  std::filesystem::remove_all(tmp / "sp_corpus_a");
  std::filesystem::remove_all(tmp / "sp_corpus_b");
}
