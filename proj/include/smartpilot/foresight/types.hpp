#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smartpilot/errors.hpp"

namespace smartpilot::foresight {

inline constexpr std::int64_t kHourMs = 3'600'000;

/// Units produced per period for one product.
struct ForecastSeries {
  std::string product_id;
  std::vector<double> values;
  std::vector<std::int64_t> timestamps;
  std::int64_t period_ms = kHourMs;

  std::size_t size() const { return values.size(); }

  void validate() const {
    if (timestamps.size() != values.size())
      throw InputError("series '" + product_id + "': " + std::to_string(values.size()) + " values but " +
                       std::to_string(timestamps.size()) + " timestamps");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0)) throw InputError("series '" + product_id + "': negative or NaN value at " + std::to_string(i));
      if (i > 0 && timestamps[i] - timestamps[i - 1] != period_ms)
        throw InputError("series '" + product_id + "': timestamps not spaced by the period at " + std::to_string(i));
    }
  }
  friend bool operator==(const ForecastSeries&, const ForecastSeries&) = default;
};

/// Per-period exogenous features, row t aligned with series period t.
struct StructuredFeatures {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;

  std::size_t dim() const { return names.size(); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw LookupError("no structured feature '" + name + "'");
  }

  void validate(std::size_t periods) const {
    if (rows.size() != periods)
      throw InputError("structured features have " + std::to_string(rows.size()) + " rows for " +
                       std::to_string(periods) + " periods");
    for (std::size_t t = 0; t < rows.size(); ++t)
      if (rows[t].size() != names.size())
        throw InputError("structured feature row " + std::to_string(t) + " has " + std::to_string(rows[t].size()) +
                         " entries, schema has " + std::to_string(names.size()));
  }
  friend bool operator==(const StructuredFeatures&, const StructuredFeatures&) = default;
};

struct ProductSeries {
  ForecastSeries series;
  StructuredFeatures features;
  friend bool operator==(const ProductSeries&, const ProductSeries&) = default;
};

}  // namespace smartpilot::foresight
