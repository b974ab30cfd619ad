#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/predictx/types.hpp"

namespace smartpilot::predictx {

// On-disk layout of a dataset directory:
//   timeseries.tsv      timestamp, state_id, one column per channel, label
//                       (window_len + 1 consecutive rows per sample, the last
//                       being the frame after the window)
//   image_features.tsv  timestamp, source_camera, feature values (one row per
//                       sample, keyed by the window's last timestamp)
//   dataset.json        window_len and channel names
inline constexpr const char* kTimeseriesFile = "timeseries.tsv";
inline constexpr const char* kImageFile = "image_features.tsv";
inline constexpr const char* kDatasetMetaFile = "dataset.json";

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError(where + ": not a number: '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError(where + ": not an integer: '" + s + "'");
  return v;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline void write_dataset(const Dataset& data, const std::filesystem::path& dir, std::int64_t frame_period_ms = 1000) {
  std::filesystem::create_directories(dir);
  if (data.samples.empty()) throw InputError("write_dataset: empty dataset");
  const std::size_t l = data.samples.front().window.window_len;
  std::ofstream ts(dir / kTimeseriesFile), im(dir / kImageFile);
  if (!ts || !im) throw InputError("cannot write dataset files in " + dir.string());
  ts << "timestamp\tstate_id";
  for (const auto& n : data.channel_names) ts << '\t' << n;
  ts << "\tlabel\n";
  im << "timestamp\tsource_camera\tfeatures\n";
  for (const auto& s : data.samples) {
    const auto& w = s.window;
    if (w.window_len != l) throw InputError("write_dataset: mixed window lengths");
    for (std::size_t t = 0; t <= l; ++t) {
      const auto stamp = w.timestamp + (static_cast<std::int64_t>(t) - static_cast<std::int64_t>(l - 1)) * frame_period_ms;
      ts << stamp << '\t' << (t < l ? w.state_ids[t] : s.next_state);
      const auto row = t < l ? w.frame(t) : std::span<const double>(s.next_frame);
      for (double v : row) ts << '\t' << detail::fmt(v);
      ts << '\t' << to_string(w.label) << '\n';
    }
    im << w.timestamp << '\t' << s.image.source_camera;
    for (double v : s.image.vector) im << '\t' << detail::fmt(v);
    im << '\n';
  }
  nlohmann::json meta{{"window_len", l}, {"channels", data.channel_names}, {"frame_period_ms", frame_period_ms}};
  std::ofstream(dir / kDatasetMetaFile) << meta.dump(2) << '\n';
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / kDatasetMetaFile);
  if (!meta_in) throw InputError("missing " + (dir / kDatasetMetaFile).string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string(kDatasetMetaFile) + ": " + e.what());
  }
  const auto l = meta.at("window_len").get<std::size_t>();
  if (l == 0) throw ValidationError("window_len must be positive");
  Dataset data;
  data.channel_names = meta.at("channels").get<std::vector<std::string>>();
  const std::size_t c = data.channel_names.size();

  std::map<std::int64_t, ImageFeatures> images;
  {
    std::ifstream in(dir / kImageFile);
    if (!in) throw InputError("missing " + (dir / kImageFile).string());
    std::string line;
    std::getline(in, line);
    for (std::size_t no = 2; std::getline(in, line); ++no) {
      if (line.empty()) continue;
      const auto f = detail::split_tabs(line);
      const std::string where = std::string(kImageFile) + ":" + std::to_string(no);
      if (f.size() < 3) throw ValidationError(where + ": expected timestamp, camera and features");
      ImageFeatures img;
      img.timestamp = detail::parse_int(f[0], where);
      img.source_camera = f[1];
      for (std::size_t i = 2; i < f.size(); ++i) img.vector.push_back(detail::parse_double(f[i], where));
      images[img.timestamp] = std::move(img);
    }
  }

  std::ifstream in(dir / kTimeseriesFile);
  if (!in) throw InputError("missing " + (dir / kTimeseriesFile).string());
  std::string line;
  std::getline(in, line);
  const auto header = detail::split_tabs(line);
  if (header.size() != c + 3) throw ValidationError(std::string(kTimeseriesFile) + ": header does not match channels");
  LabeledSample cur;
  std::size_t t = 0;
  for (std::size_t no = 2; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    const std::string where = std::string(kTimeseriesFile) + ":" + std::to_string(no);
    if (f.size() != c + 3)
      throw ValidationError(where + ": expected " + std::to_string(c + 3) + " fields, got " + std::to_string(f.size()));
    const auto stamp = detail::parse_int(f[0], where);
    std::vector<double> row;
    for (std::size_t i = 0; i < c; ++i) row.push_back(detail::parse_double(f[2 + i], where));
    const AnomalyClass label = anomaly_class_from_string(f[c + 2]);
    if (t < l) {
      if (t == 0) {
        cur = LabeledSample{};
        cur.window.window_len = l;
        cur.window.n_channels = c;
        cur.window.label = label;
      } else if (label != cur.window.label) {
        throw ValidationError(where + ": label changes inside a window");
      }
      cur.window.frames.insert(cur.window.frames.end(), row.begin(), row.end());
      cur.window.state_ids.push_back(f[1]);
      cur.window.timestamp = stamp;
      ++t;
    } else {
      cur.next_frame = std::move(row);
      cur.next_state = f[1];
      auto it = images.find(cur.window.timestamp);
      if (it == images.end())
        throw ValidationError(where + ": no image features for timestamp " + std::to_string(cur.window.timestamp));
      cur.image = it->second;
      data.samples.push_back(std::move(cur));
      t = 0;
    }
  }
  if (t != 0) throw ValidationError(std::string(kTimeseriesFile) + ": trailing partial window");
  return data;
}

}  // namespace smartpilot::predictx
