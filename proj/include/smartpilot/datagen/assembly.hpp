#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/kernel/rng.hpp"
#include "smartpilot/ontology/ontology.hpp"
#include "smartpilot/predictx/types.hpp"

namespace smartpilot::datagen {

using predictx::AnomalyClass;
using predictx::kClassCount;

struct GenConfig {
  std::uint64_t seed = 42;
  std::size_t n_channels = 12;
  std::size_t n_states = 21;
  std::size_t window_len = 30;
  std::size_t n_windows = 2000;
  std::map<AnomalyClass, double> anomaly_mix{
      {AnomalyClass::Normal, 0.4},          {AnomalyClass::NoNose, 0.1},         {AnomalyClass::NoBody1, 0.1},
      {AnomalyClass::NoBody2, 0.1},         {AnomalyClass::NoNose_NoBody2, 0.1}, {AnomalyClass::NoBody2_NoBody1, 0.1},
      {AnomalyClass::NoNose_NoBody2_NoBody1, 0.1}};
  std::size_t image_feature_dim = 64;
  // Sensor noise as a fraction of each range's half-width.
  double noise_sigma = 0.15;

  // Assembly-stream shape.
  std::size_t frames_per_state = 5;
  std::int64_t frame_period_ms = 1000;
  // Probability that a missing part leaves a trace in the sensors / the camera.
  double sensor_visibility = 0.75;
  double image_visibility = 0.75;
  // Out-of-range excursion, in half-widths beyond the bound.
  double excursion_min = 0.15;
  double excursion_max = 0.9;
  double image_signal = 2.0;
  // How far a range centre may move between cycle states.
  double state_spread = 1.0;
  // Whether the excursion continues into the frame after the window.
  bool persist_into_target = true;

  void validate() const {
    if (n_channels < 6) throw ConfigError("n_channels must be at least 6 (three signature pairs)");
    if (n_states == 0 || window_len == 0 || n_windows == 0 || image_feature_dim == 0 || frames_per_state == 0)
      throw ConfigError("all counts must be positive");
    double sum = 0.0;
    for (const auto& [cls, p] : anomaly_mix) {
      if (p < 0.0 || !std::isfinite(p))
        throw ConfigError(std::string("negative anomaly proportion for ") + predictx::to_string(cls));
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("anomaly_mix proportions must sum to 1");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be non-negative");
    if (sensor_visibility <= 0.0 || sensor_visibility > 1.0 || image_visibility < 0.0 || image_visibility > 1.0)
      throw ConfigError("visibilities must lie in (0, 1]");
  }
};

inline const std::vector<std::string>& base_channel_names() {
  static const std::vector<std::string> names{
      "R04_Nose_Gripper_Load", "Nose_Station_Proximity", "R02_Body1_Gripper_Load", "Body1_Station_Proximity",
      "R03_Body2_Gripper_Load", "Body2_Station_Proximity", "R01_Joint_Potentiometer", "R02_Joint_Potentiometer",
      "R03_Joint_Potentiometer", "R04_Joint_Potentiometer", "Conveyor_Speed", "Conveyor_Load"};
  return names;
}

inline std::vector<std::string> channel_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < base_channel_names().size()) {
      out.push_back(base_channel_names()[i]);
    } else {
      std::string id = std::to_string(i + 1);
      out.push_back("Aux_Sensor_" + std::string(3 - std::min<std::size_t>(3, id.size()), '0') + id);
    }
  }
  return out;
}

/// Channels that carry each missing-part signature, and the direction of the
/// excursion (+1 above the range, -1 below).
struct Signature {
  unsigned component = 0;
  std::array<std::size_t, 2> channels{};
  std::array<int, 2> direction{};
};

inline std::array<Signature, 3> signatures() {
  return {Signature{predictx::kNose, {0, 1}, {-1, +1}}, Signature{predictx::kBody1, {2, 3}, {-1, +1}},
          Signature{predictx::kBody2, {4, 5}, {-1, +1}}};
}

struct AssemblyMetadata {
  std::vector<std::string> channel_names;
  std::array<Signature, 3> signatures = datagen::signatures();
  // Unit image-feature direction per component (nose, body1, body2).
  std::array<std::vector<double>, 3> image_directions;
  std::map<AnomalyClass, std::size_t> label_counts;
};

struct AssemblyData {
  predictx::Dataset dataset;
  ontology::ProcessOntology ontology;
  AssemblyMetadata metadata;
};

inline std::string state_id(std::size_t k) {
  std::string id = std::to_string(k);
  return "S" + std::string(2 - std::min<std::size_t>(2, id.size()), '0') + id;
}

inline ontology::ProcessOntology make_assembly_ontology(const GenConfig& cfg) {
  static const char* kPhases[] = {"pick", "align", "insert", "fasten", "inspect", "release", "transfer"};
  static const char* kParts[] = {"nose cone", "body 1", "body 2", "tail"};
  kernel::CounterRng rng(cfg.seed, "assembly/ontology");
  const auto names = channel_names(cfg.n_channels);
  std::vector<ontology::CycleState> states;
  for (std::size_t s = 0; s < cfg.n_states; ++s) {
    ontology::CycleState st;
    st.state_id = state_id(s);
    const char* phase = kPhases[s % 7];
    const char* part = kParts[(s / 7) % 4];
    st.description = std::string("Cycle state ") + std::to_string(s + 1) + ": " + phase + " " + part;
    st.robot_functions["R01"] = std::string("feeds the ") + part + " from the conveyor";
    st.robot_functions["R02"] = std::string(phase) + " body 1 at the assembly stand";
    st.robot_functions["R03"] = std::string(phase) + " body 2 at the assembly stand";
    st.robot_functions["R04"] = std::string(phase) + " the nose cone onto the rocket";
    for (std::size_t c = 0; c < cfg.n_channels; ++c) {
      const double centre = 10.0 * static_cast<double>(c % 4 + 1) + rng.uniform(-cfg.state_spread, cfg.state_spread);
      const double half = rng.uniform(0.8, 1.6);
      const char* unit = (c % 2 == 0) ? "N" : "mm";
      auto round4 = [](double v) { return std::round(v * 1e4) / 1e4; };
      st.variable_ranges[names[c]] = {round4(centre - half), round4(centre + half), unit};
    }
    states.push_back(std::move(st));
  }
  return ontology::ProcessOntology("1.0", "future-factories-synthetic", std::move(states));
}

// Per-class counts whose proportions match `mix` within one window
// (largest-remainder apportionment, ties in enumeration order).
inline std::map<AnomalyClass, std::size_t> apportion(const std::map<AnomalyClass, double>& mix, std::size_t n) {
  std::map<AnomalyClass, std::size_t> counts;
  std::vector<std::pair<double, AnomalyClass>> remainders;
  std::size_t assigned = 0;
  for (auto cls : predictx::kAllClasses) {
    auto it = mix.find(cls);
    const double exact = (it == mix.end() ? 0.0 : it->second) * static_cast<double>(n);
    const auto floor = static_cast<std::size_t>(std::floor(exact + 1e-9));
    counts[cls] = floor;
    assigned += floor;
    remainders.push_back({exact - static_cast<double>(floor), cls});
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n && i < remainders.size(); ++i, ++assigned) ++counts[remainders[i].second];
  return counts;
}

/// FF-like assembly windows with planted missing-part anomalies.
///
/// Normal frames stay strictly inside their state's ranges. Each missing part
/// drives its two signature channels outside the range from an onset frame
/// through the target frame (when the part is visible to the sensors) and
/// shifts the camera features along the part's direction (when visible to the
/// camera). At least one part of every anomalous window is visible to the
/// sensors, so label != Normal <=> some frame violates its range.
inline AssemblyData gen_assembly(const GenConfig& cfg) {
  cfg.validate();
  AssemblyData out;
  out.ontology = make_assembly_ontology(cfg);
  const auto names = channel_names(cfg.n_channels);
  out.metadata.channel_names = names;
  out.dataset.channel_names = names;

  kernel::CounterRng dir_rng(cfg.seed, "assembly/image-directions");
  for (auto& d : out.metadata.image_directions) {
    d.resize(cfg.image_feature_dim);
    double norm = 0.0;
    for (auto& v : d) {
      v = dir_rng.normal();
      norm += v * v;
    }
    for (auto& v : d) v /= std::sqrt(norm);
  }

  out.metadata.label_counts = apportion(cfg.anomaly_mix, cfg.n_windows);
  std::vector<AnomalyClass> labels;
  for (const auto& [cls, n] : out.metadata.label_counts) labels.insert(labels.end(), n, cls);
  kernel::CounterRng label_rng(cfg.seed, "assembly/labels");
  kernel::shuffle(labels, label_rng);

  const auto& states = out.ontology.states();
  const std::size_t cycle = cfg.n_states * cfg.frames_per_state;
  const std::size_t l = cfg.window_len;
  const std::size_t c_n = cfg.n_channels;
  kernel::CounterRng phase_rng(cfg.seed, "assembly/channel-phase");
  std::vector<double> phase(c_n), period(c_n);
  for (std::size_t c = 0; c < c_n; ++c) {
    phase[c] = phase_rng.uniform(0.0, 6.283185307179586);
    period[c] = phase_rng.uniform(8.0, 20.0);
  }

  std::int64_t clock = 0;
  for (std::size_t w = 0; w < cfg.n_windows; ++w) {
    kernel::CounterRng rng(cfg.seed, "assembly/window/" + std::to_string(w));
    const AnomalyClass label = labels[w];
    const unsigned comps = predictx::components_of(label);
    const std::size_t pos0 = static_cast<std::size_t>(rng.below(cycle));

    unsigned sensor_visible = 0, image_visible = 0;
    for (const auto& sig : out.metadata.signatures) {
      if (!(comps & sig.component)) continue;
      if (rng.bernoulli(cfg.sensor_visibility)) sensor_visible |= sig.component;
      if (rng.bernoulli(cfg.image_visibility)) image_visible |= sig.component;
    }
    if (comps != 0 && sensor_visible == 0) {
      std::vector<unsigned> present;
      for (const auto& sig : out.metadata.signatures)
        if (comps & sig.component) present.push_back(sig.component);
      sensor_visible = present[rng.below(present.size())];
    }
    const std::size_t onset = l / 3 + static_cast<std::size_t>(rng.below(l - l / 3));
    std::array<double, 3> excursion{};
    for (auto& e : excursion) e = rng.uniform(cfg.excursion_min, cfg.excursion_max);

    predictx::LabeledSample sample;
    auto& win = sample.window;
    win.window_len = l;
    win.n_channels = c_n;
    win.label = label;
    win.frames.resize(l * c_n);
    sample.next_frame.resize(c_n);
    for (std::size_t t = 0; t <= l; ++t) {
      const std::size_t pos = pos0 + t;
      const auto& st = states[(pos / cfg.frames_per_state) % cfg.n_states];
      double* row = t < l ? win.frames.data() + t * c_n : sample.next_frame.data();
      for (std::size_t c = 0; c < c_n; ++c) {
        const auto& r = st.variable_ranges.at(names[c]);
        const double mid = 0.5 * (r.lo + r.hi);
        const double half = 0.5 * (r.hi - r.lo);
        const double wave = 0.45 * std::sin(phase[c] + 6.283185307179586 * static_cast<double>(pos) / period[c]);
        double v = mid + half * (wave + cfg.noise_sigma * rng.normal());
        v = std::clamp(v, r.lo + 0.02 * half, r.hi - 0.02 * half);
        row[c] = v;
      }
      if (t >= onset && (t < l || cfg.persist_into_target)) {
        for (std::size_t k = 0; k < 3; ++k) {
          const auto& sig = out.metadata.signatures[k];
          if (!(sensor_visible & sig.component)) continue;
          for (std::size_t j = 0; j < 2; ++j) {
            const std::size_t c = sig.channels[j];
            const auto& r = st.variable_ranges.at(names[c]);
            const double half = 0.5 * (r.hi - r.lo);
            const double beyond = std::max(0.05, excursion[k] + 0.05 * rng.normal()) * half;
            row[c] = sig.direction[j] > 0 ? r.hi + beyond : r.lo - beyond;
          }
        }
      }
      if (t < l) {
        win.state_ids.push_back(st.state_id);
      } else {
        sample.next_state = st.state_id;
      }
    }
    clock += static_cast<std::int64_t>(l + 1) * cfg.frame_period_ms;
    win.timestamp = clock - 2 * cfg.frame_period_ms;

    auto& img = sample.image;
    img.source_camera = "cam-01";
    img.timestamp = win.timestamp;
    img.vector.resize(cfg.image_feature_dim);
    for (auto& v : img.vector) v = rng.normal();
    for (std::size_t k = 0; k < 3; ++k) {
      if (!(image_visible & out.metadata.signatures[k].component)) continue;
      for (std::size_t i = 0; i < cfg.image_feature_dim; ++i)
        img.vector[i] += cfg.image_signal * out.metadata.image_directions[k][i];
    }
    out.dataset.samples.push_back(std::move(sample));
  }
  return out;
}

}  // namespace smartpilot::datagen
