#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/kernel/rng.hpp"
#include "smartpilot/predictx/fusion.hpp"
#include "smartpilot/predictx/metrics.hpp"

namespace smartpilot::predictx {

struct Split {
  Dataset train;
  Dataset test;
};

/// Seeded shuffle, then the first `train_fraction` of samples train.
inline Split split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(data.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  kernel::CounterRng rng(seed, "ablation/split");
  kernel::shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
  Split s;
  s.train.channel_names = s.test.channel_names = data.channel_names;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? s.train : s.test).samples.push_back(data.samples[order[i]]);
  return s;
}

struct VariantResult {
  FusionVariant variant = FusionVariant::P1;
  WeightedMetrics metrics;       // 7-class metrics
  bool detection_only = false;   // B2: metrics are anomaly-vs-normal
  double train_seconds = 0.0;
};

struct AblationReport {
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<VariantResult> variants;  // B1, B2, P1, P2, P3
  // P1 evaluated with all-zero image features at test time.
  std::optional<WeightedMetrics> p1_zero_image;

  const VariantResult& at(FusionVariant v) const {
    for (const auto& r : variants)
      if (r.variant == v) return r;
    throw LookupError(std::string("variant ") + to_string(v) + " not in report");
  }
};

inline std::vector<AnomalyClass> predict_classes(const FusionModel& m, const Dataset& data, bool zero_image = false) {
  std::vector<AnomalyClass> out;
  out.reserve(data.samples.size());
  for (const auto& s : data.samples) {
    if (zero_image) {
      ImageFeatures blank = s.image;
      std::fill(blank.vector.begin(), blank.vector.end(), 0.0);
      out.push_back(fuse_predict(m, s.window, blank).predicted_class);
    } else {
      out.push_back(fuse_predict(m, s.window, s.image).predicted_class);
    }
  }
  return out;
}

inline std::vector<AnomalyClass> labels_of(const Dataset& data) {
  std::vector<AnomalyClass> out;
  for (const auto& s : data.samples) out.push_back(s.window.label);
  return out;
}

/// Trains and evaluates every variant on an 80/20 split with one shared seed.
inline AblationReport run_ablation(const Dataset& data, const ontology::ProcessOntology& onto, FusionConfig cfg,
                                   std::uint64_t seed, double train_fraction = 0.8) {
  cfg.seed = seed;
  cfg.train.seed = seed;
  const Split split = split_dataset(data, train_fraction, seed);
  if (split.train.samples.empty() || split.test.samples.empty()) throw InputError("ablation: split left an empty side");
  check_ontology_coverage(split.train, onto);
  AblationReport report;
  report.seed = seed;
  report.train_size = split.train.samples.size();
  report.test_size = split.test.samples.size();
  const Pretrained pre = pretrain(split.train, cfg);
  const auto labels = labels_of(split.test);
  for (auto v : kAllVariants) {
    const auto start = std::chrono::steady_clock::now();
    const TrainedFusion trained = train_fusion(v, split.train, &onto, cfg, &pre);
    VariantResult r;
    r.variant = v;
    r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto preds = predict_classes(trained.model, split.test);
    r.detection_only = v == FusionVariant::B2;
    r.metrics = r.detection_only ? compute_detection_metrics(preds, labels) : compute_weighted_metrics(preds, labels);
    if (v == FusionVariant::P1)
      report.p1_zero_image = compute_weighted_metrics(predict_classes(trained.model, split.test, true), labels);
    report.variants.push_back(std::move(r));
  }
  return report;
}

inline nlohmann::json to_json(const AblationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& v : r.variants) {
    nlohmann::json row = to_json(v.metrics);
    row["variant"] = to_string(v.variant);
    row["detection_only"] = v.detection_only;
    rows.push_back(row);
  }
  nlohmann::json j{{"seed", r.seed}, {"train_size", r.train_size}, {"test_size", r.test_size}, {"variants", rows}};
  if (r.p1_zero_image) {
    nlohmann::json extra = to_json(*r.p1_zero_image);
    extra["variant"] = "P1_zero_image";
    j["extra_rows"] = nlohmann::json::array({extra});
  }
  return j;
}

/// Fixed-width table: variant, weighted precision/recall/F1, accuracy, support.
inline std::string format_table(const AblationReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10s %8s\n", "variant", "precision", "recall", "f1",
                "accuracy", "support");
  os << line;
  auto emit = [&](const std::string& name, const WeightedMetrics& m) {
    std::snprintf(line, sizeof line, "%-16s %10.4f %10.4f %10.4f %10.4f %8zu\n", name.c_str(), m.precision, m.recall,
                  m.f1, m.accuracy, m.support);
    os << line;
  };
  for (const auto& v : r.variants) emit(std::string(to_string(v.variant)) + (v.detection_only ? " (D)" : ""), v.metrics);
  if (r.p1_zero_image) emit("P1 zero-image", *r.p1_zero_image);
  os << "\nper-class F1\n";
  std::snprintf(line, sizeof line, "%-24s", "class");
  os << line;
  for (const auto& v : r.variants)
    if (!v.detection_only) {
      std::snprintf(line, sizeof line, " %8s", to_string(v.variant));
      os << line;
    }
  os << '\n';
  for (auto c : kAllClasses) {
    std::snprintf(line, sizeof line, "%-24s", to_string(c));
    os << line;
    for (const auto& v : r.variants)
      if (!v.detection_only) {
        std::snprintf(line, sizeof line, " %8.4f", v.metrics.find(to_string(c))->f1);
        os << line;
      }
    os << '\n';
  }
  return os.str();
}

}  // namespace smartpilot::predictx
