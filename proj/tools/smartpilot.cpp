// smartpilot: generation, training, ablation, evaluation, serving, replay
// and ad-hoc questions from one binary.
//
// Exit codes: 0 success, 1 validation error (bad flags, config, inputs),
// 2 runtime error.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "smartpilot/datagen/assembly.hpp"
#include "smartpilot/datagen/corpus.hpp"
#include "smartpilot/datagen/forecast.hpp"
#include "smartpilot/foresight/io.hpp"
#include "smartpilot/infoguide/eval.hpp"
#include "smartpilot/kernel/checkpoint.hpp"
#include "smartpilot/predictx/ablation.hpp"
#include "smartpilot/predictx/checkpoint.hpp"
#include "smartpilot/predictx/io.hpp"
#include "smartpilot/runtime/ingest.hpp"
#include "smartpilot/runtime/server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smartpilot;

namespace {

// ---- configuration ---------------------------------------------------------

json default_config() {
  return {
      {"seed", 42u},
      {"data", "data"},
      {"out", nullptr},
      {"ontology", nullptr},
      {"models", nullptr},
      {"agent", "predictx"},
      {"variant", nullptr},
      {"rate", "inf"},
      {"port", 8080},
      {"host", "127.0.0.1"},
      {"tag_port", 0},
      {"facility", "line-1"},
      {"log_level", "info"},
      {"replay_frames", 1000},
      {"assembly", {{"n_windows", 2000}, {"window_len", 30}, {"n_channels", 12}, {"image_feature_dim", 64}}},
      {"forecast", {{"n_periods", 360}}},
      {"fusion", {{"epochs", 30}, {"autoencoder_epochs", 30}, {"image_epochs", 30}}},
      {"foresight", {{"epochs", 12}, {"lookback", 24}}},
      {"runtime", {{"stride", 1}, {"insight_window", 10}, {"degraded_threshold", 0.3}}},
      {"answer", {{"k", 3}, {"alpha", 0.7}, {"refusal_threshold", 0.25}}},
      {"generator", {{"kind", "none"}, {"host", "127.0.0.1"}, {"port", 0}}},
  };
}

// Object keys in `patch` must exist in `base`; values replace recursively.
void merge_checked(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + where + it.key() + "'");
    auto& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object())
      merge_checked(slot, it.value(), where + it.key() + ".");
    else
      slot = it.value();
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, data, ontology, agent, variant, rate, config, facility;
  std::optional<int> port;
};

struct Context {
  json cfg;
  std::string config_hash;
  std::string command;

  std::uint64_t seed() const { return cfg["seed"].get<std::uint64_t>(); }
  fs::path data() const { return cfg["data"].get<std::string>(); }
  fs::path models() const { return cfg["models"].is_null() ? data() / "models" : fs::path(cfg["models"].get<std::string>()); }
  fs::path ontology() const {
    return cfg["ontology"].is_null() ? data() / "ontology.json" : fs::path(cfg["ontology"].get<std::string>());
  }
  std::optional<fs::path> out() const {
    return cfg["out"].is_null() ? std::nullopt : std::optional<fs::path>(cfg["out"].get<std::string>());
  }
  bool verbose() const { return cfg["log_level"] != "quiet"; }

  void log(const std::string& msg) const {
    if (verbose()) std::cerr << "[smartpilot " << command << "] " << msg << '\n';
  }
};

Context resolve(const std::string& command, const Flags& f) {
  Context ctx;
  ctx.command = command;
  ctx.cfg = default_config();
  std::optional<std::string> path = f.config;
  if (!path)
    if (const char* env = std::getenv("SMARTPILOT_CONFIG"); env && *env) path = env;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + *path);
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) throw ConfigError("config file " + *path + " is not valid JSON");
    merge_checked(ctx.cfg, file, "");
  }
  auto& c = ctx.cfg;
  if (f.seed) c["seed"] = *f.seed;
  if (f.out) c["out"] = *f.out;
  if (f.data) c["data"] = *f.data;
  if (f.ontology) c["ontology"] = *f.ontology;
  if (f.agent) c["agent"] = *f.agent;
  if (f.variant) c["variant"] = *f.variant;
  if (f.rate) c["rate"] = *f.rate;
  if (f.port) c["port"] = *f.port;
  if (f.facility) c["facility"] = *f.facility;
  if (!c["seed"].is_number_integer() || c["seed"].get<std::int64_t>() < 0) throw ConfigError("seed must be a non-negative integer");
  ctx.config_hash = hex64(kernel::fnv1a(c.dump()));
  ctx.log("seed=" + std::to_string(ctx.seed()) + " config_hash=" + ctx.config_hash);
  return ctx;
}

double parse_rate(const json& v) {
  if (v.is_number()) {
    if (!(v.get<double>() > 0.0)) throw ConfigError("rate must be positive");
    return v.get<double>();
  }
  const auto s = v.get<std::string>();
  if (s == "inf" || s == "max") return runtime::kAsFastAsPossible;
  double r = 0.0;
  try {
    std::size_t used = 0;
    r = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw ConfigError("rate must be a positive number or 'inf', got '" + s + "'");
  }
  if (!(r > 0.0)) throw ConfigError("rate must be positive");
  return r;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
}

// ---- config -> library structs --------------------------------------------

datagen::GenConfig assembly_config(const Context& ctx) {
  const auto& a = ctx.cfg["assembly"];
  datagen::GenConfig g;
  g.seed = ctx.seed();
  g.n_windows = a.value("n_windows", g.n_windows);
  g.window_len = a.value("window_len", g.window_len);
  g.n_channels = a.value("n_channels", g.n_channels);
  g.image_feature_dim = a.value("image_feature_dim", g.image_feature_dim);
  return g;
}

predictx::FusionConfig fusion_config(const Context& ctx) {
  const auto& f = ctx.cfg["fusion"];
  predictx::FusionConfig cfg;
  cfg.seed = ctx.seed();
  cfg.train.seed = ctx.seed();
  cfg.train.epochs = f.value("epochs", cfg.train.epochs);
  cfg.autoencoder_epochs = f.value("autoencoder_epochs", cfg.autoencoder_epochs);
  cfg.image_epochs = f.value("image_epochs", cfg.image_epochs);
  return cfg;
}

foresight::ForecastConfig forecast_config(const Context& ctx) {
  const auto& f = ctx.cfg["foresight"];
  foresight::ForecastConfig cfg;
  cfg.seed = ctx.seed();
  cfg.train.seed = ctx.seed();
  cfg.train.epochs = f.value("epochs", cfg.train.epochs);
  cfg.lookback = f.value("lookback", cfg.lookback);
  return cfg;
}

infoguide::AnswerConfig answer_config(const Context& ctx) {
  const auto& a = ctx.cfg["answer"];
  infoguide::AnswerConfig cfg;
  cfg.k = a.value("k", cfg.k);
  cfg.alpha = a.value("alpha", cfg.alpha);
  cfg.refusal_threshold = a.value("refusal_threshold", cfg.refusal_threshold);
  cfg.validate();
  return cfg;
}

std::unique_ptr<infoguide::GeneratorClient> generator_client(const Context& ctx) {
  const auto& g = ctx.cfg["generator"];
  const std::string kind = g.value("kind", "none");
  if (kind == "none") return nullptr;
  const std::string host = g.value("host", "127.0.0.1");
  const int port = g.value("port", 0);
  if (port <= 0) throw ConfigError("generator.port must be set for generator kind '" + kind + "'");
  if (kind == "http") return std::make_unique<infoguide::HttpGeneratorClient>(host, port);
  if (kind == "socket") return std::make_unique<infoguide::LineSocketGeneratorClient>(host, port);
  throw ConfigError("generator.kind must be none, http or socket");
}

predictx::FusionVariant fusion_variant(const Context& ctx) {
  return predictx::fusion_variant_from_string(ctx.cfg["variant"].is_null() ? "P3" : ctx.cfg["variant"].get<std::string>());
}

bool kil_variant(const Context& ctx) {
  const std::string v = ctx.cfg["variant"].is_null() ? "kil" : ctx.cfg["variant"].get<std::string>();
  if (v != "kil" && v != "lstm") throw ConfigError("foresight variant must be 'kil' or 'lstm'");
  return v == "kil";
}

// ---- artifacts -----------------------------------------------------------------

fs::path fusion_path(const Context& ctx, predictx::FusionVariant v) {
  return ctx.models() / ("fusion_" + std::string(predictx::to_string(v)) + ".json");
}

fs::path foresight_path(const Context& ctx, bool kil) {
  return ctx.models() / (kil ? "foresight_kil.json" : "foresight_lstm.json");
}

std::vector<runtime::ProductModel> load_products(const Context& ctx, bool kil, bool required) {
  const auto path = foresight_path(ctx, kil);
  if (!fs::exists(path)) {
    if (required) throw InputError("missing " + path.string() + "; run `train --agent foresight` first");
    ctx.log("no forecaster checkpoints at " + path.string() + "; forecasts disabled");
    return {};
  }
  const auto doc = kernel::load_json(path.string());
  const auto series = foresight::read_forecast_file(ctx.data() / "forecast.tsv");
  std::vector<runtime::ProductModel> out;
  for (const auto& p : doc.at("products")) {
    runtime::ProductModel pm;
    const std::string id = p.at("product_id");
    auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.series.product_id == id; });
    if (it == series.end()) throw ValidationError("product '" + id + "' missing from forecast.tsv");
    pm.data = *it;
    pm.model = foresight::forecaster_from_json(p.at("model"));
    const auto& e = p.at("evaluation");
    foresight::ForecastResult r;
    r.product_id = id;
    r.mae = e.at("mae");
    r.rmse = e.at("rmse");
    pm.evaluation = r;
    out.push_back(std::move(pm));
  }
  return out;
}

std::shared_ptr<const infoguide::InfoIndex> load_index(const Context& ctx, infoguide::GeneratorClient* client) {
  const auto corpus = ctx.data() / "corpus";
  const auto keywords = fs::exists(corpus / "keywords.json") ? infoguide::load_keywords((corpus / "keywords.json").string())
                                                             : infoguide::default_keywords();
  auto idx = infoguide::build_index(infoguide::read_manuals(corpus / "manuals"), keywords, {}, client);
  for (const auto& w : idx.warnings) ctx.log("warning: " + w);
  return std::make_shared<const infoguide::InfoIndex>(std::move(idx));
}

runtime::Snapshots load_snapshots(const Context& ctx, infoguide::GeneratorClient* client, bool with_index) {
  runtime::Snapshots s;
  const auto fp = fusion_path(ctx, fusion_variant(ctx));
  if (!fs::exists(fp)) throw InputError("missing " + fp.string() + "; run `train --agent predictx` first");
  s.model = std::make_shared<const predictx::FusionModel>(predictx::load_fusion_model(fp.string()));
  s.ontology = std::make_shared<const ontology::ProcessOntology>(ontology::load_ontology(ctx.ontology().string()));
  s.products = load_products(ctx, true, false);
  if (with_index) {
    s.index = load_index(ctx, client);
    const auto kw = ctx.data() / "corpus" / "keywords.json";
    if (fs::exists(kw)) s.keywords = infoguide::load_keywords(kw.string());
  }
  return s;
}

runtime::RuntimeConfig runtime_config(const Context& ctx) {
  const auto& r = ctx.cfg["runtime"];
  runtime::RuntimeConfig cfg;
  cfg.stride = r.value("stride", cfg.stride);
  cfg.insight_window = r.value("insight_window", cfg.insight_window);
  cfg.degraded_threshold = r.value("degraded_threshold", cfg.degraded_threshold);
  cfg.facility = ctx.cfg["facility"];
  cfg.answer = answer_config(ctx);
  return cfg;
}

// ---- subcommands ---------------------------------------------------------------

int cmd_gen(const Context& ctx) {
  const fs::path out = ctx.out().value_or(ctx.data());
  const auto assembly = datagen::gen_assembly(assembly_config(ctx));
  predictx::write_dataset(assembly.dataset, out / "assembly");
  ontology::save_ontology(assembly.ontology, (out / "ontology.json").string());

  datagen::ForecastGenConfig fg;
  fg.seed = ctx.seed();
  fg.n_periods = ctx.cfg["forecast"].value("n_periods", fg.n_periods);
  foresight::write_forecast_file(datagen::gen_forecast(fg), out / "forecast.tsv");
  write_text(out / "forecast.json", datagen::forecast_metadata(fg).dump(2) + "\n");

  datagen::CorpusConfig cc;
  cc.seed = ctx.seed();
  datagen::write_corpus(datagen::gen_corpus(cc), out / "corpus");

  std::ostringstream replay;
  runtime::write_replay(assembly.dataset, replay, ctx.cfg["facility"], 1000, ctx.cfg["replay_frames"].get<std::size_t>());
  write_text(out / "replay.tsv", replay.str());

  // Paths are left out so the same seed and settings give identical bytes
  // wherever the output lands.
  json recorded = ctx.cfg;
  for (const char* k : {"data", "out", "ontology", "models"}) recorded.erase(k);
  write_text(out / "manifest.json", json{{"seed", ctx.seed()}, {"config", recorded}}.dump(2) + "\n");
  std::cout << "wrote " << out.string() << " (" << assembly.dataset.samples.size() << " windows, "
            << fg.products.size() << " products, corpus, replay)\n";
  return 0;
}

int cmd_train(const Context& ctx) {
  const std::string agent = ctx.cfg["agent"];
  const fs::path out = ctx.out().value_or(ctx.models());
  fs::create_directories(out);
  if (agent == "predictx") {
    const auto variant = fusion_variant(ctx);
    const auto data = predictx::read_dataset(ctx.data() / "assembly");
    const auto onto = ontology::load_ontology(ctx.ontology().string());
    const auto split = predictx::split_dataset(data, 0.8, ctx.seed());
    const auto trained = predictx::train_fusion(variant, split.train, &onto, fusion_config(ctx));
    const auto path = out / ("fusion_" + std::string(predictx::to_string(variant)) + ".json");
    predictx::save_fusion_model(trained.model, path.string());
    const auto preds = predictx::predict_classes(trained.model, split.test);
    const auto metrics = predictx::compute_weighted_metrics(preds, predictx::labels_of(split.test));
    write_text(out / ("fusion_" + std::string(predictx::to_string(variant)) + ".metrics.json"),
               json{{"seed", ctx.seed()}, {"config_hash", ctx.config_hash}, {"test", predictx::to_json(metrics)},
                    {"loss_history", trained.loss_history}}
                       .dump(2) + "\n");
    std::printf("%s: test accuracy %.4f, weighted F1 %.4f -> %s\n", predictx::to_string(variant), metrics.accuracy,
                metrics.f1, path.c_str());
    return 0;
  }
  if (agent == "foresight") {
    const bool kil = kil_variant(ctx);
    const auto cfg = forecast_config(ctx);
    json products = json::array();
    for (const auto& p : foresight::read_forecast_file(ctx.data() / "forecast.tsv")) {
      const auto split = foresight::split_series(p.series, p.features, 0.8, cfg.lookback);
      const auto t = foresight::train_forecaster(split.train, split.train_feats, kil, cfg);
      const auto eval = foresight::evaluate(t.model, p.series, p.features, split.test_begin);
      products.push_back({{"product_id", p.series.product_id}, {"model", foresight::to_json(t.model)},
                          {"evaluation", foresight::to_json(eval)}});
      std::printf("%-12s %s MAE %.4f RMSE %.4f\n", p.series.product_id.c_str(), kil ? "kil" : "lstm", eval.mae, eval.rmse);
    }
    const auto path = out / (kil ? "foresight_kil.json" : "foresight_lstm.json");
    kernel::save_json({{"seed", ctx.seed()}, {"config_hash", ctx.config_hash}, {"products", products}}, path.string());
    std::printf("-> %s\n", path.c_str());
    return 0;
  }
  throw ConfigError("train: --agent must be predictx or foresight");
}

int cmd_ablate(const Context& ctx) {
  const auto data = predictx::read_dataset(ctx.data() / "assembly");
  const auto onto = ontology::load_ontology(ctx.ontology().string());
  const auto report = predictx::run_ablation(data, onto, fusion_config(ctx), ctx.seed());
  const fs::path out = ctx.out().value_or(ctx.data() / ("ablation_seed" + std::to_string(ctx.seed()) + ".json"));
  auto j = predictx::to_json(report);
  j["config_hash"] = ctx.config_hash;
  write_text(out, j.dump(2) + "\n");
  std::cout << predictx::format_table(report) << "report -> " << out.string() << '\n';
  return 0;
}

int cmd_eval(const Context& ctx) {
  const std::string agent = ctx.cfg["agent"];
  json result;
  if (agent == "predictx") {
    const auto variant = fusion_variant(ctx);
    const auto model = predictx::load_fusion_model(fusion_path(ctx, variant).string());
    const auto split = predictx::split_dataset(predictx::read_dataset(ctx.data() / "assembly"), 0.8, ctx.seed());
    const auto m = predictx::compute_weighted_metrics(predictx::predict_classes(model, split.test),
                                                      predictx::labels_of(split.test));
    result = predictx::to_json(m);
    result["variant"] = predictx::to_string(variant);
    std::printf("%s accuracy %.4f precision %.4f recall %.4f f1 %.4f (n=%zu)\n", predictx::to_string(variant),
                m.accuracy, m.precision, m.recall, m.f1, m.support);
  } else if (agent == "foresight") {
    const bool kil = kil_variant(ctx);
    const auto doc = kernel::load_json(foresight_path(ctx, kil).string());
    const auto cfg = forecast_config(ctx);
    result["products"] = json::array();
    for (const auto& p : foresight::read_forecast_file(ctx.data() / "forecast.tsv")) {
      for (const auto& entry : doc.at("products")) {
        if (entry.at("product_id") != p.series.product_id) continue;
        const auto model = foresight::forecaster_from_json(entry.at("model"));
        const auto split = foresight::split_series(p.series, p.features, 0.8, model.lookback);
        const auto r = foresight::evaluate(model, p.series, p.features, split.test_begin);
        result["products"].push_back(foresight::to_json(r));
        std::printf("%-12s MAE %.4f RMSE %.4f\n", r.product_id.c_str(), r.mae, r.rmse);
      }
    }
    (void)cfg;
  } else if (agent == "infoguide") {
    auto client = generator_client(ctx);
    const auto idx = load_index(ctx, client.get());
    std::vector<infoguide::GoldItem> gold;
    std::vector<std::string> ood;
    infoguide::read_questions(ctx.data() / "corpus" / "questions.json", gold, ood);
    const auto r = infoguide::evaluate_retrieval(*idx, gold, ood, answer_config(ctx), client.get());
    result = infoguide::to_json(r);
    std::printf("top-%zu hit rate %.3f (%zu/%zu), refusal rate %.3f (%zu/%zu), mean latency %.3f ms\n",
                answer_config(ctx).k, r.hit_rate(), r.top_k_hits, r.questions, r.refusal_rate(), r.ood_refused, r.ood,
                r.mean_latency_ms);
  } else {
    throw ConfigError("eval: --agent must be predictx, foresight or infoguide");
  }
  if (auto out = ctx.out()) write_text(*out, result.dump(2) + "\n");
  return 0;
}

struct ReplaySummary {
  runtime::IngestStats stats;
  std::size_t predictions = 0;
  double seconds = 0.0;
};

ReplaySummary run_replay(runtime::Runtime& rt, const fs::path& file, double rate) {
  ReplaySummary s;
  const auto start = std::chrono::steady_clock::now();
  s.stats = runtime::replay_file(file.string(), [&](runtime::TagFrame f) { rt.publish_frame(std::move(f)); }, rate);
  if (!rt.wait_idle(std::chrono::minutes(10))) throw std::runtime_error("pipeline did not drain");
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s.predictions = rt.predictions_made();
  return s;
}

int cmd_replay(const Context& ctx) {
  const double rate = parse_rate(ctx.cfg["rate"]);
  runtime::Runtime rt(load_snapshots(ctx, nullptr, false), runtime_config(ctx));
  std::ofstream file;
  std::ostream* log = &std::cout;
  if (auto out = ctx.out()) {
    if (out->has_parent_path()) fs::create_directories(out->parent_path());
    file.open(*out, std::ios::binary);
    if (!file) throw InputError("cannot write " + out->string());
    log = &file;
  }
  rt.set_log(log);
  rt.start();
  const auto s = run_replay(rt, ctx.data() / "replay.tsv", rate);
  rt.stop();
  for (const auto& w : s.stats.messages) ctx.log("warning: " + w);
  std::fprintf(stderr, "replayed %zu frames, %zu predictions, %zu warnings, %zu skipped frames, %.1f frames/s\n",
               s.stats.frames, s.predictions, s.stats.warnings, rt.skipped_frames(),
               s.seconds > 0 ? static_cast<double>(s.stats.frames) / s.seconds : 0.0);
  return 0;
}

int cmd_serve(const Context& ctx, bool replay_requested) {
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  auto client = generator_client(ctx);
  runtime::Runtime rt(load_snapshots(ctx, client.get(), true), runtime_config(ctx));
  rt.start();
  runtime::ServerConfig scfg;
  scfg.host = ctx.cfg["host"];
  scfg.port = ctx.cfg["port"];
  runtime::Server server(rt, scfg, client.get());
  server.start();
  std::printf("serving on http://%s:%d\n", scfg.host.c_str(), server.port());
  std::fflush(stdout);

  std::unique_ptr<runtime::TagStreamListener> tags;
  if (const int tp = ctx.cfg["tag_port"]; tp > 0) {
    tags = std::make_unique<runtime::TagStreamListener>(tp, [&](runtime::TagFrame f) { rt.publish_frame(std::move(f)); });
    ctx.log("tag stream listening on port " + std::to_string(tags->port()));
  }
  std::thread replayer;
  if (replay_requested) {
    const double rate = parse_rate(ctx.cfg["rate"]);
    replayer = std::thread([&ctx, &rt, rate] {
      try {
        const auto s = runtime::replay_file((ctx.data() / "replay.tsv").string(),
                                            [&](runtime::TagFrame f) { rt.publish_frame(std::move(f)); }, rate);
        ctx.log("replay finished: " + std::to_string(s.frames) + " frames, " + std::to_string(s.warnings) + " warnings");
      } catch (const std::exception& e) {
        ctx.log(std::string("replay failed: ") + e.what());
      }
    });
  }
  int sig = 0;
  sigwait(&sigs, &sig);
  ctx.log("shutting down");
  if (tags) tags->stop();
  if (replayer.joinable()) replayer.join();
  server.stop();
  rt.stop();
  return 0;
}

int cmd_ask(const Context& ctx, const std::string& query, bool remote) {
  json a;
  if (remote) {
    httplib::Client c(ctx.cfg["host"].get<std::string>(), ctx.cfg["port"].get<int>());
    c.set_read_timeout(10, 0);
    auto r = c.Post("/api/ask", json{{"query", query}}.dump(), "application/json");
    if (!r) throw std::runtime_error("cannot reach server at port " + std::to_string(ctx.cfg["port"].get<int>()));
    a = json::parse(r->body, nullptr, false);
    if (r->status != 200 || a.is_discarded())
      throw std::runtime_error("server error " + std::to_string(r->status) + ": " + r->body);
  } else {
    auto client = generator_client(ctx);
    const auto idx = load_index(ctx, client.get());
    a = infoguide::to_json(infoguide::answer(query, *idx, answer_config(ctx), client.get()));
  }
  if (a["status"] == "refused") {
    std::cout << "No answer: the manuals do not cover this question.\n";
  } else {
    std::cout << a["text"].get<std::string>() << '\n';
    for (const auto& c : a["contexts"])
      std::printf("  [%s] combined %.3f\n", c["chunk_id"].get<std::string>().c_str(), c["combined"].get<double>());
  }
  std::printf("(%s, %.2f ms)\n", a["generator"].get<std::string>().c_str(), a["latency_ms"].get<double>());
  return 0;
}

// ---- argument parsing ------------------------------------------------------------

enum FlagSet : unsigned {
  kSeed = 1,
  kOut = 2,
  kData = 4,
  kOntology = 8,
  kAgent = 16,
  kVariant = 32,
  kRate = 64,
  kPort = 128,
  kFacility = 256,
};

void add_flags(CLI::App* app, Flags& f, unsigned which) {
  app->add_option("--config", f.config, "JSON config file (default: $SMARTPILOT_CONFIG); flags override it");
  if (which & kSeed) app->add_option("--seed", f.seed, "Random seed (default 42)");
  if (which & kOut) app->add_option("--out", f.out, "Output path");
  if (which & kData) app->add_option("--data", f.data, "Data directory written by `gen` (default data)");
  if (which & kOntology) app->add_option("--ontology", f.ontology, "Process ontology JSON (default <data>/ontology.json)");
  if (which & kAgent) app->add_option("--agent", f.agent, "predictx | foresight | infoguide");
  if (which & kVariant)
    app->add_option("--variant", f.variant, "PredictX: B1 B2 P1 P2 P3 (default P3); ForeSight: kil | lstm (default kil)");
  if (which & kRate) app->add_option("--rate", f.rate, "Replay speed multiplier, or inf for as fast as possible");
  if (which & kPort) app->add_option("--port", f.port, "HTTP port (default 8080)");
  if (which & kFacility) app->add_option("--facility", f.facility, "Facility id (default line-1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SmartPilot: anomaly prediction, production forecasting and manual Q&A agents"};
  app.require_subcommand(1);
  Flags f;
  auto* gen = app.add_subcommand("gen", "Generate assembly dataset, ontology, forecast series, manuals corpus and replay file");
  add_flags(gen, f, kSeed | kOut | kData | kFacility);
  auto* train = app.add_subcommand("train", "Train one agent's model into <data>/models (or --out)");
  add_flags(train, f, kSeed | kOut | kData | kOntology | kAgent | kVariant);
  auto* ablate = app.add_subcommand("ablate", "Train and compare B1, B2, P1, P2, P3 on an 80/20 split");
  add_flags(ablate, f, kSeed | kOut | kData | kOntology);
  auto* eval = app.add_subcommand("eval", "Evaluate a trained agent (predictx, foresight) or manual retrieval (infoguide)");
  add_flags(eval, f, kSeed | kOut | kData | kAgent | kVariant);
  auto* serve = app.add_subcommand("serve", "Run the agents and the REST/stream endpoints");
  add_flags(serve, f, kData | kOntology | kVariant | kRate | kPort | kFacility);
  auto* replay = app.add_subcommand("replay", "Replay <data>/replay.tsv through the agents and write the prediction log");
  add_flags(replay, f, kOut | kData | kOntology | kVariant | kRate | kFacility);
  auto* ask = app.add_subcommand("ask", "Ask a question against the manuals (or a running server with --port)");
  std::string query;
  ask->add_option("query", query, "Question text")->required();
  add_flags(ask, f, kData | kPort);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  auto* sub = app.get_subcommands().front();
  try {
    const Context ctx = resolve(sub->get_name(), f);
    if (sub == gen) return cmd_gen(ctx);
    if (sub == train) return cmd_train(ctx);
    if (sub == ablate) return cmd_ablate(ctx);
    if (sub == eval) return cmd_eval(ctx);
    if (sub == serve) return cmd_serve(ctx, f.rate.has_value());
    if (sub == replay) return cmd_replay(ctx);
    if (sub == ask) return cmd_ask(ctx, query, f.port.has_value());
  } catch (const std::invalid_argument& e) {  // InputError, ValidationError, ConfigError, DimensionError
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::out_of_range& e) {  // LookupError
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
