#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/kernel/checkpoint.hpp"
#include "smartpilot/predictx/fusion.hpp"

namespace smartpilot::predictx {

namespace detail {

inline nlohmann::json net_or_null(const kernel::Network& n) {
  return n.layers.empty() ? nlohmann::json(nullptr) : kernel::to_json(n);
}

inline kernel::Network net_from(const nlohmann::json& j) {
  return j.is_null() ? kernel::Network{} : kernel::network_from_json(j);
}

inline nlohmann::json scaler_json(const Standardizer& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

inline Standardizer scaler_from(const nlohmann::json& j) {
  return {j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

}  // namespace detail

inline nlohmann::json to_json(const FusionModel& m) {
  return {{"format", "smartpilot-fusion"},
          {"version", 1},
          {"variant", to_string(m.variant)},
          {"window_len", m.window_len},
          {"n_channels", m.n_channels},
          {"image_dim", m.image_dim},
          {"channel_names", m.channel_names},
          {"scaler", detail::scaler_json(m.scaler)},
          {"image_scaler", detail::scaler_json(m.image_scaler)},
          {"encoder", detail::net_or_null(m.encoder)},
          {"decoder", detail::net_or_null(m.decoder)},
          {"image_branch", detail::net_or_null(m.image_branch)},
          {"head", detail::net_or_null(m.head)}};
}

inline FusionModel fusion_model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "smartpilot-fusion") throw ValidationError("not a fusion model checkpoint");
    FusionModel m;
    m.variant = fusion_variant_from_string(j.at("variant").get<std::string>());
    m.window_len = j.at("window_len").get<std::size_t>();
    m.n_channels = j.at("n_channels").get<std::size_t>();
    m.image_dim = j.at("image_dim").get<std::size_t>();
    m.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    m.scaler = detail::scaler_from(j.at("scaler"));
    m.image_scaler = detail::scaler_from(j.at("image_scaler"));
    m.encoder = detail::net_from(j.at("encoder"));
    m.decoder = detail::net_from(j.at("decoder"));
    m.image_branch = detail::net_from(j.at("image_branch"));
    m.head = detail::net_from(j.at("head"));
    if (m.channel_names.size() != m.n_channels) throw ValidationError("fusion checkpoint: channel_names size mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("fusion checkpoint malformed: ") + e.what());
  }
}

inline void save_fusion_model(const FusionModel& m, const std::string& path) { kernel::save_json(to_json(m), path); }
inline FusionModel load_fusion_model(const std::string& path) { return fusion_model_from_json(kernel::load_json(path)); }

}  // namespace smartpilot::predictx
