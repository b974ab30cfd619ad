#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/kernel/network.hpp"

namespace smartpilot::kernel {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json tensor_to_json(const Tensor& t) { return {{"shape", t.shape}, {"values", t.values}}; }

inline Tensor tensor_from_json(const nlohmann::json& j) {
  return Tensor(j.at("shape").get<std::vector<std::size_t>>(), j.at("values").get<std::vector<double>>());
}

inline nlohmann::json to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    layers.push_back({{"kind", to_string(l.spec.kind)},
                      {"input_dim", l.spec.input_dim},
                      {"output_dim", l.spec.output_dim},
                      {"activation", to_string(l.spec.activation)},
                      {"trainable", l.spec.trainable},
                      {"return_sequences", l.spec.return_sequences},
                      {"weight", tensor_to_json(l.weight)},
                      {"bias", tensor_to_json(l.bias)}});
  }
  return {{"format", "smartpilot-network"}, {"version", kCheckpointVersion}, {"seed", net.seed}, {"layers", layers}};
}

inline Network network_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "smartpilot-network") throw ValidationError("checkpoint: not a network document");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version " + j.at("version").dump());
  Network net;
  net.seed = j.at("seed").get<std::uint64_t>();
  std::vector<LayerSpec> specs;
  for (const auto& lj : j.at("layers")) {
    Layer l;
    l.spec.kind = layer_kind_from_string(lj.at("kind").get<std::string>());
    l.spec.input_dim = lj.at("input_dim").get<std::size_t>();
    l.spec.output_dim = lj.at("output_dim").get<std::size_t>();
    l.spec.activation = activation_from_string(lj.at("activation").get<std::string>());
    l.spec.trainable = lj.at("trainable").get<bool>();
    l.spec.return_sequences = lj.at("return_sequences").get<bool>();
    l.weight = tensor_from_json(lj.at("weight"));
    l.bias = tensor_from_json(lj.at("bias"));
    specs.push_back(l.spec);
    net.layers.push_back(std::move(l));
  }
  validate_specs(specs);
  return net;
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(1) << '\n';
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void save_network(const Network& net, const std::string& path) { save_json(to_json(net), path); }
inline Network load_network(const std::string& path) { return network_from_json(load_json(path)); }

/// FNV-1a over the raw bytes of every parameter; equal hashes mean
/// bit-identical parameters for all practical purposes.
inline std::uint64_t parameter_hash(const Network& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& l : net.layers) {
    for (double v : l.weight.values) mix(v);
    for (double v : l.bias.values) mix(v);
  }
  return h;
}

}  // namespace smartpilot::kernel
