#pragma once

#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/predictx/types.hpp"
#include "smartpilot/runtime/bus.hpp"
#include "smartpilot/runtime/types.hpp"

namespace smartpilot::runtime {

inline constexpr double kAsFastAsPossible = std::numeric_limits<double>::infinity();

namespace detail {

inline std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_value(const TagValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(v));
  return buf;
}

}  // namespace detail

/// "timestamp \t facility_id \t tag \t value". Numeric values become doubles,
/// anything else stays text. nullopt for malformed lines.
inline std::optional<TagUpdate> parse_replay_line(const std::string& line) {
  std::vector<std::string> f;
  std::size_t b = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      f.push_back(line.substr(b, i - b));
      b = i + 1;
    }
  }
  if (!f.empty() && !f.back().empty() && f.back().back() == '\r') f.back().pop_back();
  if (f.size() != 4 || f[1].empty() || f[2].empty() || f[3].empty()) return std::nullopt;
  std::int64_t ts = 0;
  auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), ts);
  if (ec != std::errc() || p != f[0].data() + f[0].size()) return std::nullopt;
  TagUpdate u;
  u.timestamp = ts;
  u.facility_id = f[1];
  u.tag = f[2];
  if (auto v = detail::parse_number(f[3]))
    u.value = *v;
  else
    u.value = f[3];
  return u;
}

inline std::string format_replay_line(const TagUpdate& u) {
  return std::to_string(u.timestamp) + "\t" + u.facility_id + "\t" + u.tag + "\t" + detail::format_value(u.value);
}

inline std::optional<TagUpdate> tag_update_from_json(const std::string& line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (!j.contains("tag") || !j["tag"].is_string() || !j.contains("timestamp") || !j["timestamp"].is_number_integer() ||
      !j.contains("facility_id") || !j["facility_id"].is_string() || !j.contains("value"))
    return std::nullopt;
  TagUpdate u;
  u.tag = j["tag"];
  u.timestamp = j["timestamp"];
  u.facility_id = j["facility_id"];
  if (j["value"].is_number())
    u.value = j["value"].get<double>();
  else if (j["value"].is_string())
    u.value = j["value"].get<std::string>();
  else
    return std::nullopt;
  if (u.tag.empty()) return std::nullopt;
  return u;
}

struct IngestStats {
  std::size_t lines = 0;
  std::size_t frames = 0;
  std::size_t warnings = 0;
  std::vector<std::string> messages;  // first few warnings

  void warn(std::string m) {
    ++warnings;
    if (messages.size() < 20) messages.push_back(std::move(m));
  }
};

/// Groups consecutive updates sharing (timestamp, facility) into frames and
/// rejects updates that go back in time for their tag.
class FrameAssembler {
 public:
  /// Returns the finished previous frame when `u` starts a new one.
  std::optional<TagFrame> push(const TagUpdate& u, IngestStats& stats, const std::string& where = {}) {
    auto key = u.facility_id + '\x1f' + u.tag;
    auto it = last_ts_.find(key);
    if (it != last_ts_.end() && u.timestamp < it->second) {
      stats.warn(where + "timestamp goes backwards for tag '" + u.tag + "'");
      return std::nullopt;
    }
    last_ts_[key] = u.timestamp;
    std::optional<TagFrame> done;
    if (cur_ && (cur_->timestamp != u.timestamp || cur_->facility_id != u.facility_id)) {
      done = std::move(cur_);
      cur_.reset();
    }
    if (!cur_) {
      cur_ = TagFrame{};
      cur_->timestamp = u.timestamp;
      cur_->facility_id = u.facility_id;
    }
    cur_->values[u.tag] = u.value;
    return done;
  }

  std::optional<TagFrame> flush() {
    auto out = std::move(cur_);
    cur_.reset();
    return out;
  }

 private:
  std::optional<TagFrame> cur_;
  std::map<std::string, std::int64_t> last_ts_;
};

/// Reads a replay stream and hands frames to `sink`, paced at `rate` x the
/// recorded timeline (infinity: no pacing). Malformed lines are skipped with
/// a warning.
inline IngestStats replay(std::istream& in, const std::function<void(TagFrame)>& sink,
                          double rate = kAsFastAsPossible) {
  if (!(rate > 0.0)) throw ConfigError("replay rate must be positive");
  IngestStats stats;
  FrameAssembler asm_;
  const bool paced = std::isfinite(rate);
  std::optional<std::int64_t> t0;
  const auto start = std::chrono::steady_clock::now();
  auto emit = [&](TagFrame f) {
    if (paced) {
      if (!t0) t0 = f.timestamp;
      const double offset_ms = static_cast<double>(f.timestamp - *t0) / rate;
      std::this_thread::sleep_until(start + std::chrono::microseconds(static_cast<std::int64_t>(offset_ms * 1000.0)));
    }
    ++stats.frames;
    sink(std::move(f));
  };
  std::string line;
  while (std::getline(in, line)) {
    ++stats.lines;
    if (line.empty() || line.front() == '#') continue;
    const auto u = parse_replay_line(line);
    if (!u) {
      stats.warn("line " + std::to_string(stats.lines) + ": malformed replay record");
      continue;
    }
    if (auto f = asm_.push(*u, stats, "line " + std::to_string(stats.lines) + ": ")) emit(std::move(*f));
  }
  if (auto f = asm_.flush()) emit(std::move(*f));
  return stats;
}

inline IngestStats replay_file(const std::string& path, const std::function<void(TagFrame)>& sink,
                               double rate = kAsFastAsPossible) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open replay file " + path);
  return replay(in, sink, rate);
}

/// Publishes every frame on topic "frames".
inline IngestStats replay_to_bus(Bus& bus, std::istream& in, double rate = kAsFastAsPossible) {
  return replay(in, [&](TagFrame f) { bus.publish("frames", AgentMessage{"frames", std::move(f), 0, 0}); }, rate);
}

/// Writes a dataset as a replay stream: each window's frames with their
/// channel values and a "state" tag; the last frame of a window also carries
/// the camera features as "image.<i>". Frame timestamps count back from the
/// window timestamp at `period_ms`.
inline void write_replay(const predictx::Dataset& data, std::ostream& out, const std::string& facility = "line-1",
                         std::int64_t period_ms = 1000, std::size_t max_frames = 0) {
  std::size_t frames = 0;
  std::optional<std::int64_t> last_ts;
  for (const auto& s : data.samples) {
    const auto& w = s.window;
    for (std::size_t t = 0; t < w.window_len; ++t) {
      if (max_frames && frames == max_frames) return;
      const std::int64_t ts = w.timestamp - static_cast<std::int64_t>(w.window_len - 1 - t) * period_ms;
      if (last_ts && ts <= *last_ts) throw InputError("write_replay: window timestamps overlap");
      last_ts = ts;
      const auto row = w.frame(t);
      for (std::size_t c = 0; c < w.n_channels; ++c)
        out << format_replay_line({data.channel_names[c], row[c], ts, facility}) << '\n';
      out << format_replay_line({"state", w.state_ids[t], ts, facility}) << '\n';
      if (t + 1 == w.window_len)
        for (std::size_t i = 0; i < s.image.vector.size(); ++i)
          out << format_replay_line({"image." + std::to_string(i), s.image.vector[i], ts, facility}) << '\n';
      ++frames;
    }
  }
}

/// Live tag stream: TCP server accepting newline-delimited JSON records
/// {tag, value, timestamp, facility_id}. Each connection has its own frame
/// assembler; a frame is handed to `sink` when the next one starts or the
/// connection closes.
class TagStreamListener {
 public:
  TagStreamListener(int port, std::function<void(TagFrame)> sink, const std::string& host = "127.0.0.1")
      : sink_(std::move(sink)) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw IngestionError("tag listener: socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = host == "0.0.0.0" ? htonl(INADDR_ANY) : htonl(INADDR_LOOPBACK);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 8) != 0) {
      ::close(fd_);
      throw IngestionError("tag listener: cannot listen on port " + std::to_string(port));
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { accept_loop(); });
  }

  ~TagStreamListener() { stop(); }
  TagStreamListener(const TagStreamListener&) = delete;
  TagStreamListener& operator=(const TagStreamListener&) = delete;

  int port() const { return port_; }

  void stop() {
    if (stopping_.exchange(true)) return;
    if (thread_.joinable()) thread_.join();
    for (auto& t : workers_)
      if (t.joinable()) t.join();
    ::close(fd_);
  }

  IngestStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

 private:
  void accept_loop() {
    while (!stopping_) {
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0) continue;
      const int c = ::accept(fd_, nullptr, nullptr);
      if (c < 0) continue;
      workers_.emplace_back([this, c] { serve(c); });
    }
  }

  void serve(int c) {
    FrameAssembler asm_;
    std::string buf;
    char chunk[4096];
    auto handle = [&](const std::string& line) {
      IngestStats local;
      std::optional<TagFrame> f;
      {
        std::lock_guard lock(mu_);
        ++stats_.lines;
        const auto u = tag_update_from_json(line);
        if (!u) {
          stats_.warn("malformed tag record");
          return;
        }
        f = asm_.push(*u, stats_);
        if (f) ++stats_.frames;
      }
      if (f) sink_(std::move(*f));
    };
    while (!stopping_) {
      pollfd p{c, POLLIN, 0};
      const int r = ::poll(&p, 1, 100);
      if (r == 0) continue;
      if (r < 0) break;
      const auto n = ::recv(c, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      for (auto nl = buf.find('\n'); nl != std::string::npos; nl = buf.find('\n')) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) handle(line);
      }
    }
    ::close(c);
    std::optional<TagFrame> f;
    {
      std::lock_guard lock(mu_);
      f = asm_.flush();
      if (f) ++stats_.frames;
    }
    if (f) sink_(std::move(*f));
  }

  std::function<void(TagFrame)> sink_;
  int fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
  std::vector<std::thread> workers_;
  mutable std::mutex mu_;
  IngestStats stats_;
};

}  // namespace smartpilot::runtime
