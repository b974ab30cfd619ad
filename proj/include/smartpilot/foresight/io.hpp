#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "smartpilot/errors.hpp"
#include "smartpilot/foresight/types.hpp"
#include "smartpilot/predictx/io.hpp"

namespace smartpilot::foresight {

// One row per period: timestamp, product_id, target, feature columns...
// Products are interleaved freely; rows of one product must be in time order.
inline void write_forecast_file(const std::vector<ProductSeries>& products, const std::filesystem::path& path) {
  if (products.empty()) throw InputError("write_forecast_file: no products");
  const auto& names = products.front().features.names;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "timestamp\tproduct_id\ttarget";
  for (const auto& n : names) out << '\t' << n;
  out << '\n';
  for (const auto& p : products) {
    if (p.features.names != names) throw InputError("write_forecast_file: products disagree on feature schema");
    p.features.validate(p.series.size());
    for (std::size_t t = 0; t < p.series.size(); ++t) {
      out << p.series.timestamps[t] << '\t' << p.series.product_id << '\t' << predictx::detail::fmt(p.series.values[t]);
      for (double v : p.features.rows[t]) out << '\t' << predictx::detail::fmt(v);
      out << '\n';
    }
  }
}

/// Reads every product in file order. The period is inferred from the first
/// two timestamps of each product (one-row products keep the default).
inline std::vector<ProductSeries> read_forecast_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
  const auto header = predictx::detail::split_tabs(line);
  if (header.size() < 3 || header[0] != "timestamp" || header[1] != "product_id" || header[2] != "target")
    throw ValidationError(path.string() + ": header must start with timestamp, product_id, target");
  const std::vector<std::string> names(header.begin() + 3, header.end());
  std::vector<ProductSeries> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t no = 2; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    const auto f = predictx::detail::split_tabs(line);
    const std::string where = path.filename().string() + ":" + std::to_string(no);
    if (f.size() != header.size())
      throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(f.size()));
    auto [it, added] = index.try_emplace(f[1], out.size());
    if (added) {
      out.emplace_back();
      out.back().series.product_id = f[1];
      out.back().features.names = names;
    }
    auto& p = out[it->second];
    p.series.timestamps.push_back(predictx::detail::parse_int(f[0], where));
    p.series.values.push_back(predictx::detail::parse_double(f[2], where));
    std::vector<double> row;
    for (std::size_t i = 3; i < f.size(); ++i) row.push_back(predictx::detail::parse_double(f[i], where));
    p.features.rows.push_back(std::move(row));
  }
  for (auto& p : out) {
    if (p.series.timestamps.size() >= 2) p.series.period_ms = p.series.timestamps[1] - p.series.timestamps[0];
    try {
      p.series.validate();
    } catch (const InputError& e) {
      throw ValidationError(path.filename().string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace smartpilot::foresight
