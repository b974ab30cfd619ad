#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace smartpilot::infoguide {

/// Wire request for an external text generator. Field names are fixed:
/// {template_id, query, contexts}; the reply is {text}.
struct GenerationRequest {
  std::string template_id;  // "summarize" or "answer"
  std::string query;
  std::vector<std::string> contexts;
};

inline nlohmann::json to_json(const GenerationRequest& r) {
  return {{"template_id", r.template_id}, {"query", r.query}, {"contexts", r.contexts}};
}

inline std::optional<std::string> parse_generation_reply(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string()) return std::nullopt;
  auto text = j["text"].get<std::string>();
  if (text.empty()) return std::nullopt;
  return text;
}

/// Any generator. nullopt means unavailable, timed out, or malformed; callers
/// fall back to extractive output.
class GeneratorClient {
 public:
  virtual ~GeneratorClient() = default;
  virtual std::optional<std::string> generate(const GenerationRequest& req) = 0;
};

/// POST {template_id, query, contexts} as JSON to http://host:port/path.
class HttpGeneratorClient : public GeneratorClient {
 public:
  HttpGeneratorClient(std::string host, int port, std::string path = "/generate",
                      std::chrono::milliseconds timeout = std::chrono::milliseconds(2000))
      : host_(std::move(host)), port_(port), path_(std::move(path)), timeout_(timeout) {}

  std::optional<std::string> generate(const GenerationRequest& req) override {
    httplib::Client cli(host_, port_);
    const auto secs = timeout_.count() / 1000;
    const auto usecs = (timeout_.count() % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    auto res = cli.Post(path_, to_json(req).dump(), "application/json");
    if (!res || res->status != 200) return std::nullopt;
    return parse_generation_reply(res->body);
  }

 private:
  std::string host_;
  int port_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

/// One JSON request line out, one JSON reply line back, over TCP.
class LineSocketGeneratorClient : public GeneratorClient {
 public:
  LineSocketGeneratorClient(std::string host, int port,
                            std::chrono::milliseconds timeout = std::chrono::milliseconds(2000))
      : host_(std::move(host)), port_(port), timeout_(timeout) {}

  std::optional<std::string> generate(const GenerationRequest& req) override {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints, &res) != 0) return std::nullopt;
    int fd = -1;
    for (auto* p = res; p && fd < 0; p = p->ai_next) {
      fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
      if (fd >= 0 && ::connect(fd, p->ai_addr, p->ai_addrlen) != 0) {
        ::close(fd);
        fd = -1;
      }
    }
    freeaddrinfo(res);
    if (fd < 0) return std::nullopt;
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::optional<std::string> out;
    const std::string line = to_json(req).dump() + "\n";
    if (send_all(fd, line)) {
      std::string buf;
      if (read_line(fd, buf, deadline)) out = parse_generation_reply(buf);
    }
    ::close(fd);
    return out;
  }

 private:
  static bool send_all(int fd, const std::string& s) {
    std::size_t sent = 0;
    while (sent < s.size()) {
      const auto n = ::send(fd, s.data() + sent, s.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return false;
      sent += static_cast<std::size_t>(n);
    }
    return true;
  }

  static bool read_line(int fd, std::string& out, std::chrono::steady_clock::time_point deadline) {
    char buf[4096];
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return false;
      pollfd pfd{fd, POLLIN, 0};
      if (::poll(&pfd, 1, static_cast<int>(left.count())) <= 0) return false;
      const auto n = ::recv(fd, buf, sizeof buf, 0);
      if (n <= 0) return false;
      out.append(buf, static_cast<std::size_t>(n));
      const auto nl = out.find('\n');
      if (nl != std::string::npos) {
        out.resize(nl);
        return true;
      }
    }
  }

  std::string host_;
  int port_;
  std::chrono::milliseconds timeout_;
};

}  // namespace smartpilot::infoguide
