#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "smartpilot/errors.hpp"
#include "smartpilot/infoguide/answer.hpp"
#include "smartpilot/infoguide/index.hpp"
#include "smartpilot/infoguide/keywords.hpp"
#include "smartpilot/ontology/ontology.hpp"
#include "smartpilot/runtime/agents.hpp"
#include "smartpilot/runtime/bus.hpp"
#include "smartpilot/runtime/live_state.hpp"

namespace smartpilot::runtime {

struct RuntimeConfig {
  std::size_t stride = 1;
  std::size_t insight_window = 10;
  double degraded_threshold = 0.3;
  std::size_t recent_capacity = 1000;
  std::size_t frames_buffer = 65536;
  std::size_t buffer = 4096;
  std::string facility = "line-1";
  infoguide::AnswerConfig answer;
  infoguide::IndexConfig index;

  void validate() const {
    if (stride == 0 || insight_window == 0) throw ConfigError("stride and insight window must be at least 1");
    if (degraded_threshold < 0.0 || degraded_threshold > 1.0) throw ConfigError("degraded threshold must lie in [0, 1]");
    if (recent_capacity == 0 || frames_buffer == 0 || buffer == 0) throw ConfigError("buffers must be positive");
    answer.validate();
  }
};

struct Snapshots {
  std::shared_ptr<const predictx::FusionModel> model;
  std::shared_ptr<const ontology::ProcessOntology> ontology;
  std::vector<ProductModel> products;
  std::shared_ptr<const infoguide::InfoIndex> index;
  infoguide::KeywordSet keywords = infoguide::default_keywords();
};

struct FacilityInfo {
  std::string name;
  std::size_t chunks = 0;
  std::size_t contexts = 0;
  std::vector<std::string> warnings;
};

/// The agents and their wiring. Each agent is one thread reading one bus
/// subscription; the state writer is the only thread touching LiveState and
/// the recent-prediction store.
///
///   frames -> predictx -> predictions -> bridge -> insights -> foresight -> forecasts
///   {predictions, insights, forecasts} -> state writer -> LiveState, log
class Runtime {
 public:
  Runtime(Snapshots snaps, RuntimeConfig cfg = {})
      : cfg_((cfg.validate(), cfg)),
        bus_(cfg_.buffer),
        ontology_(snaps.ontology),
        index_(snaps.index ? snaps.index : std::make_shared<const infoguide::InfoIndex>()),
        keywords_(std::move(snaps.keywords)),
        predictx_(snaps.model, &ontology_, cfg_.stride),
        bridge_(cfg_.insight_window, cfg_.degraded_threshold),
        foresight_(std::move(snaps.products)),
        facility_{cfg_.facility, index_.get()->chunks.size(), index_.get()->contexts.size(), {}} {
    frames_sub_ = bus_.subscribe("frames", cfg_.frames_buffer);
    pred_sub_ = bus_.subscribe("predictions");
    insight_sub_ = bus_.subscribe("insights");
    state_sub_ = bus_.subscribe("predictions");
    bus_.attach("insights", state_sub_);
    bus_.attach("forecasts", state_sub_);
    model_channels_ = snaps.model->channel_names;
  }

  ~Runtime() { stop(); }
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Prediction log sink; set before start().
  void set_log(std::ostream* log) { log_ = log; }

  void start() {
    if (running_.exchange(true)) return;
    threads_.emplace_back([this] { loop(frames_sub_, frames_done_, [this](AgentMessage& m) { on_frame(m); }); });
    threads_.emplace_back([this] { loop(pred_sub_, preds_done_, [this](AgentMessage& m) { on_prediction(m); }); });
    threads_.emplace_back([this] { loop(insight_sub_, insights_done_, [this](AgentMessage& m) { on_insight(m); }); });
    threads_.emplace_back([this] { loop(state_sub_, state_done_, [this](AgentMessage& m) { on_state(m); }); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    for (auto& t : threads_)
      if (t.joinable()) t.join();
    threads_.clear();
    if (log_) log_->flush();
  }

  /// Blocks until every published message has been handled (or dropped) by
  /// every stage. Returns false on timeout.
  bool wait_idle(std::chrono::milliseconds timeout = std::chrono::seconds(60)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      // A stage's count is only final once the stage feeding it is settled,
      // so the check has to hold once per pipeline stage in a row.
      if (idle() && idle() && idle() && idle()) return true;
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    return false;
  }

  Bus& bus() { return bus_; }
  LiveState& live() { return live_; }
  const RuntimeConfig& config() const { return cfg_; }

  void publish_frame(TagFrame f) { bus_.publish("frames", AgentMessage{"frames", std::move(f), 0, 0}); }

  /// Newest first.
  std::vector<predictx::PredictionResult> recent(std::size_t n) const {
    std::lock_guard lock(store_mu_);
    std::vector<predictx::PredictionResult> out;
    for (auto it = recent_.rbegin(); it != recent_.rend() && out.size() < n; ++it) out.push_back(*it);
    return out;
  }

  std::optional<predictx::PredictionResult> find_prediction(std::uint64_t id) const {
    std::lock_guard lock(store_mu_);
    for (auto it = recent_.rbegin(); it != recent_.rend(); ++it)
      if (it->id == id) return *it;
    return std::nullopt;
  }

  std::map<std::string, foresight::ForecastResult> forecasts() const {
    std::lock_guard lock(store_mu_);
    return forecasts_;
  }

  const std::vector<ProductModel>& products() const { return foresight_.products(); }

  std::size_t skipped_frames() const { return skipped_.load(); }
  std::size_t predictions_made() const { return predictions_.load(); }

  infoguide::Answer ask(std::string_view query, infoguide::GeneratorClient* client = nullptr) const {
    const auto idx = index_.get();
    const auto view = live_.snapshot()->view();
    return infoguide::answer(query, *idx, cfg_.answer, client, &view);
  }

  /// Rebuilds the manual index and swaps in a new ontology for another
  /// facility. Nothing changes if any step fails.
  FacilityInfo set_facility(const std::string& name, const std::filesystem::path& manuals_dir,
                            const std::filesystem::path& ontology_path,
                            infoguide::GeneratorClient* client = nullptr) {
    if (name.empty()) throw InputError("facility name is empty");
    auto onto = std::make_shared<const ontology::ProcessOntology>(ontology::load_ontology(ontology_path.string()));
    const auto vars = onto->variables();
    for (const auto& ch : model_channels_)
      if (std::find(vars.begin(), vars.end(), ch) == vars.end())
        throw ValidationError("ontology has no ranges for model channel '" + ch + "'");
    auto manuals = infoguide::read_manuals(manuals_dir);
    if (manuals.empty()) throw InputError("no manuals (*.txt, *.md) in " + manuals_dir.string());
    auto idx = std::make_shared<const infoguide::InfoIndex>(infoguide::build_index(manuals, keywords_, cfg_.index, client));
    FacilityInfo info{name, idx->chunks.size(), idx->contexts.size(), idx->warnings};
    std::lock_guard lock(facility_mu_);
    ontology_.set(std::move(onto));
    index_.set(std::move(idx));
    facility_ = info;
    return info;
  }

  FacilityInfo facility() const {
    std::lock_guard lock(facility_mu_);
    return facility_;
  }

 private:
  template <typename Fn>
  void loop(const std::shared_ptr<Subscription>& sub, std::atomic<std::uint64_t>& done, Fn&& handle) {
    while (running_) {
      auto m = sub->pop(std::chrono::milliseconds(20));
      if (!m) continue;
      handle(*m);
      done.fetch_add(1);
    }
  }

  void on_frame(AgentMessage& m) {
    auto* f = std::get_if<TagFrame>(&m.payload);
    if (!f) return;
    const auto before = predictx_.skipped_frames();
    auto p = predictx_.on_frame(*f);
    if (predictx_.skipped_frames() != before) skipped_.fetch_add(1);
    if (p) bus_.publish("predictions", AgentMessage{"predictions", std::move(*p), 0, 0});
  }

  void on_prediction(AgentMessage& m) {
    auto* p = std::get_if<predictx::PredictionResult>(&m.payload);
    if (!p) return;
    bus_.publish("insights", AgentMessage{"insights", bridge_.push(*p), 0, 0});
  }

  void on_insight(AgentMessage& m) {
    auto* in = std::get_if<AnomalyInsight>(&m.payload);
    if (!in) return;
    for (auto& f : foresight_.on_insight(*in))
      bus_.publish("forecasts", AgentMessage{"forecasts", std::move(f.result), 0, 0});
  }

  void on_state(AgentMessage& m) {
    if (auto* p = std::get_if<predictx::PredictionResult>(&m.payload)) {
      if (log_) *log_ << prediction_log_line(*p) << '\n';
      {
        std::lock_guard lock(store_mu_);
        recent_.push_back(*p);
        if (recent_.size() > cfg_.recent_capacity) recent_.pop_front();
      }
      predictions_.fetch_add(1);
      live_.set_prediction(*p, m.emitted_at);
    } else if (auto* in = std::get_if<AnomalyInsight>(&m.payload)) {
      live_.set_insight(*in, m.emitted_at);
    } else if (auto* f = std::get_if<foresight::ForecastResult>(&m.payload)) {
      {
        std::lock_guard lock(store_mu_);
        forecasts_[f->product_id] = *f;
      }
      live_.set_forecast(*f, m.emitted_at);
    }
  }

  bool idle() {
    const auto settled = [](std::uint64_t published, const std::atomic<std::uint64_t>& done,
                            const std::shared_ptr<Subscription>& sub) {
      return done.load() + sub->dropped() >= published && sub->size() == 0;
    };
    const auto frames = bus_.published("frames");
    const auto preds = bus_.published("predictions");
    const auto ins = bus_.published("insights");
    const auto fcs = bus_.published("forecasts");
    return settled(frames, frames_done_, frames_sub_) && settled(preds, preds_done_, pred_sub_) &&
           settled(ins, insights_done_, insight_sub_) && settled(preds + ins + fcs, state_done_, state_sub_);
  }

  RuntimeConfig cfg_;
  Bus bus_;
  LiveState live_;
  SnapshotCell<ontology::ProcessOntology> ontology_;
  SnapshotCell<infoguide::InfoIndex> index_;
  infoguide::KeywordSet keywords_;
  std::vector<std::string> model_channels_;

  PredictXAgent predictx_;
  InsightBridge bridge_;
  ForeSightAgent foresight_;

  std::shared_ptr<Subscription> frames_sub_, pred_sub_, insight_sub_, state_sub_;
  std::atomic<std::uint64_t> frames_done_{0}, preds_done_{0}, insights_done_{0}, state_done_{0};
  std::atomic<std::size_t> skipped_{0}, predictions_{0};
  std::atomic<bool> running_{false};
  std::vector<std::thread> threads_;
  std::ostream* log_ = nullptr;

  mutable std::mutex store_mu_;
  std::deque<predictx::PredictionResult> recent_;
  std::map<std::string, foresight::ForecastResult> forecasts_;

  mutable std::mutex facility_mu_;
  FacilityInfo facility_;
};

}  // namespace smartpilot::runtime
