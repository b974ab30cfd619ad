#pragma once

#include <sys/socket.h>

#include <atomic>
#include <charconv>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "smartpilot/errors.hpp"
#include "smartpilot/runtime/runtime.hpp"

namespace smartpilot::runtime {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0: any free port
  std::size_t stream_buffer = 256;
  std::size_t max_recent = 1000;
};

struct ServerStartError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// REST + server-sent-event endpoints over a Runtime. Handlers only read
/// snapshots; /api/facility swaps them.
class Server {
 public:
  Server(Runtime& rt, ServerConfig cfg = {}, infoguide::GeneratorClient* client = nullptr)
      : rt_(rt), cfg_(std::move(cfg)), client_(client) {
    routes();
  }

  ~Server() { stop(); }
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts serving on a background thread. Throws
  /// ServerStartError when the port is taken.
  void start() {
    // Plain SO_REUSEADDR: the library default adds SO_REUSEPORT, which would
    // let a second server share a busy port silently.
    http_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    if (cfg_.port == 0) {
      port_ = http_.bind_to_any_port(cfg_.host);
      if (port_ < 0) throw ServerStartError("cannot bind " + cfg_.host);
    } else {
      if (!http_.bind_to_port(cfg_.host, cfg_.port))
        throw ServerStartError("port " + std::to_string(cfg_.port) + " on " + cfg_.host + " is not available");
      port_ = cfg_.port;
    }
    thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
  }

  void stop() {
    stopping_ = true;
    http_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  static void error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"code", code}, {"message", message}}.dump(), "application/json");
  }

  static void ok(httplib::Response& res, const nlohmann::json& body) {
    res.status = 200;
    res.set_content(body.dump(), "application/json");
  }

  static std::optional<std::uint64_t> parse_uint(const std::string& s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
  }

  static std::optional<nlohmann::json> json_body(const httplib::Request& req, httplib::Response& res) {
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      error(res, 400, "bad_request", "request body must be a JSON object");
      return std::nullopt;
    }
    return j;
  }

  void routes() {
    http_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        error(res, 500, "internal", e.what());
      } catch (...) {
        error(res, 500, "internal", "unknown error");
      }
    });

    http_.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      ok(res, {{"status", "ok"}, {"agents", {"predictx", "foresight", "infoguide"}}});
    });

    http_.Get("/api/anomalies/recent", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t n = 20;
      if (req.has_param("n")) {
        const auto v = parse_uint(req.get_param_value("n"));
        if (!v || *v == 0 || *v > cfg_.max_recent)
          return error(res, 400, "bad_request", "n must be an integer in [1, " + std::to_string(cfg_.max_recent) + "]");
        n = static_cast<std::size_t>(*v);
      }
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& p : rt_.recent(n)) arr.push_back(predictx::to_json(p));
      ok(res, {{"predictions", arr}});
    });

    http_.Get(R"(/api/explain/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = parse_uint(req.matches[1]);
      if (!id) return error(res, 400, "bad_request", "prediction id must be a non-negative integer");
      const auto p = rt_.find_prediction(*id);
      if (!p) return error(res, 404, "not_found", "no prediction with id " + std::to_string(*id));
      auto j = predictx::to_json(*p);
      if (!p->explanation) j["explanation"] = nullptr;
      ok(res, j);
    });

    http_.Get("/api/forecast", [this](const httplib::Request& req, httplib::Response& res) {
      const auto live = rt_.forecasts();
      auto one = [&](const ProductModel& pm) {
        nlohmann::json j{{"product_id", pm.data.series.product_id}};
        auto it = live.find(pm.data.series.product_id);
        j["latest"] = it == live.end() ? nlohmann::json(nullptr) : foresight::to_json(it->second);
        j["next"] = it == live.end() || it->second.forecasts.empty() ? nlohmann::json(nullptr)
                                                                      : nlohmann::json(it->second.forecasts.back());
        j["evaluation"] = pm.evaluation ? foresight::to_json(*pm.evaluation) : nlohmann::json(nullptr);
        return j;
      };
      if (req.has_param("product")) {
        const auto want = req.get_param_value("product");
        for (const auto& pm : rt_.products())
          if (pm.data.series.product_id == want) return ok(res, one(pm));
        return error(res, 404, "not_found", "unknown product '" + want + "'");
      }
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& pm : rt_.products()) arr.push_back(one(pm));
      ok(res, {{"products", arr}});
    });

    http_.Post("/api/ask", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json_body(req, res);
      if (!body) return;
      if (!body->contains("query") || !(*body)["query"].is_string() || (*body)["query"].get<std::string>().empty())
        return error(res, 400, "bad_request", "field 'query' must be a non-empty string");
      ok(res, infoguide::to_json(rt_.ask((*body)["query"].get<std::string>(), client_)));
    });

    http_.Get("/api/facility", [this](const httplib::Request&, httplib::Response& res) {
      const auto f = rt_.facility();
      ok(res, {{"name", f.name}, {"chunks", f.chunks}, {"contexts", f.contexts}, {"warnings", f.warnings}});
    });

    http_.Post("/api/facility", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json_body(req, res);
      if (!body) return;
      for (const char* k : {"name", "manuals_dir", "ontology_path"})
        if (!body->contains(k) || !(*body)[k].is_string())
          return error(res, 400, "bad_request", std::string("field '") + k + "' must be a string");
      try {
        const auto f = rt_.set_facility((*body)["name"], std::string((*body)["manuals_dir"]),
                                        std::string((*body)["ontology_path"]), client_);
        ok(res, {{"name", f.name}, {"chunks", f.chunks}, {"contexts", f.contexts}, {"warnings", f.warnings}});
      } catch (const std::invalid_argument& e) {
        error(res, 400, "invalid_facility", e.what());
      } catch (const IngestionError& e) {
        error(res, 400, "invalid_facility", e.what());
      }
    });

    // Server-sent events: one "data:" line per {kind, payload} event.
    http_.Get("/ws/live", [this](const httplib::Request&, httplib::Response& res) {
      auto sub = rt_.bus().subscribe("predictions", cfg_.stream_buffer);
      rt_.bus().attach("forecasts", sub);
      rt_.bus().attach("insights", sub);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [this, sub](std::size_t, httplib::DataSink& sink) {
            if (stopping_) return false;
            auto m = sub->pop(std::chrono::milliseconds(250));
            std::string chunk = m ? "data: " + event_json(*m).dump() + "\n\n" : std::string(": keepalive\n\n");
            return sink.write(chunk.data(), chunk.size());
          },
          [sub](bool) { sub->close(); });
    });
  }

  static nlohmann::json event_json(const AgentMessage& m) {
    return std::visit(
        [&](const auto& p) -> nlohmann::json {
          using T = std::decay_t<decltype(p)>;
          nlohmann::json j{{"seq", m.seq}, {"emitted_at", m.emitted_at}};
          if constexpr (std::is_same_v<T, predictx::PredictionResult>) {
            j["kind"] = "prediction";
            j["payload"] = predictx::to_json(p);
          } else if constexpr (std::is_same_v<T, foresight::ForecastResult>) {
            j["kind"] = "forecast";
            auto f = foresight::to_json(p);
            f["next"] = p.forecasts.empty() ? nlohmann::json(nullptr) : nlohmann::json(p.forecasts.back());
            j["payload"] = f;
          } else if constexpr (std::is_same_v<T, AnomalyInsight>) {
            j["kind"] = "insight";
            j["payload"] = to_json(p);
          } else {
            j["kind"] = "frame";
            j["payload"] = to_json(p);
          }
          return j;
        },
        m.payload);
  }

  Runtime& rt_;
  ServerConfig cfg_;
  infoguide::GeneratorClient* client_;
  httplib::Server http_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  int port_ = -1;
};

}  // namespace smartpilot::runtime
