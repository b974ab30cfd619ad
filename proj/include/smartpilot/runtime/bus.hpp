#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "smartpilot/errors.hpp"
#include "smartpilot/runtime/types.hpp"

namespace smartpilot::runtime {

inline std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

/// Bounded per-subscriber queue. When full, the oldest message is dropped and
/// counted; the publisher never waits.
template <typename Message>
class BasicSubscription {
 public:
  explicit BasicSubscription(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("subscription capacity must be positive");
  }

  void push(Message m) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      if (queue_.size() == capacity_) {
        queue_.pop_front();
        ++dropped_;
      }
      queue_.push_back(std::move(m));
    }
    cv_.notify_one();
  }

  std::optional<Message> try_pop() {
    std::lock_guard lock(mu_);
    if (queue_.empty()) return std::nullopt;
    auto m = std::move(queue_.front());
    queue_.pop_front();
    return m;
  }

  /// Waits up to `timeout`; nullopt on timeout or when closed and drained.
  std::optional<Message> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    auto m = std::move(queue_.front());
    queue_.pop_front();
    return m;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }
  std::size_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return queue_.size();
  }
  std::size_t capacity() const { return capacity_; }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Message> queue_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

/// Topic fan-out. Sequence numbers are assigned and delivered under the topic
/// lock, so every subscriber sees one topic in seq order. Subscribers only see
/// messages published after they subscribed.
template <typename Message>
class BasicBus {
 public:
  using Subscription = BasicSubscription<Message>;

  explicit BasicBus(std::size_t default_capacity = 1024) : default_capacity_(default_capacity) {}

  std::shared_ptr<Subscription> subscribe(const std::string& topic, std::size_t capacity = 0) {
    if (topic.empty()) throw InputError("subscribe: empty topic");
    auto sub = std::make_shared<Subscription>(capacity ? capacity : default_capacity_);
    auto& t = topic_for(topic);
    std::lock_guard lock(t.mu);
    t.subscribers.push_back(sub);
    return sub;
  }

  /// Adds an existing subscription to another topic, so one consumer can
  /// read several topics from a single queue.
  void attach(const std::string& topic, const std::shared_ptr<Subscription>& sub) {
    if (topic.empty()) throw InputError("subscribe: empty topic");
    auto& t = topic_for(topic);
    std::lock_guard lock(t.mu);
    t.subscribers.push_back(sub);
  }

  /// Messages published on `topic` so far (its latest seq).
  std::uint64_t published(const std::string& topic) {
    auto& t = topic_for(topic);
    std::lock_guard lock(t.mu);
    return t.seq;
  }

  /// Returns the seq assigned to the message.
  std::uint64_t publish(const std::string& topic, Message m) {
    if (topic.empty()) throw InputError("publish: empty topic");
    auto& t = topic_for(topic);
    std::lock_guard lock(t.mu);
    const std::uint64_t seq = ++t.seq;
    stamp(m, topic, seq);
    std::size_t live = 0;
    for (auto& s : t.subscribers) {
      if (s->closed()) continue;
      t.subscribers[live++] = s;
    }
    t.subscribers.resize(live);
    for (std::size_t i = 0; i + 1 < t.subscribers.size(); ++i) t.subscribers[i]->push(m);
    if (!t.subscribers.empty()) t.subscribers.back()->push(std::move(m));
    return seq;
  }

  /// Messages dropped so far across live subscribers of every topic.
  std::size_t dropped() const {
    std::size_t n = 0;
    std::lock_guard lock(topics_mu_);
    for (const auto& [name, t] : topics_) {
      std::lock_guard tl(t->mu);
      for (const auto& s : t->subscribers) n += s->dropped();
    }
    return n;
  }

  std::vector<std::string> topics() const {
    std::lock_guard lock(topics_mu_);
    std::vector<std::string> out;
    for (const auto& [name, t] : topics_) out.push_back(name);
    return out;
  }

 private:
  struct Topic {
    mutable std::mutex mu;
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Subscription>> subscribers;
  };

  static void stamp(Message& m, const std::string& topic, std::uint64_t seq) {
    if constexpr (requires { m.seq; m.topic; m.emitted_at; }) {
      m.topic = topic;
      m.seq = seq;
      m.emitted_at = now_ms();
    }
  }

  Topic& topic_for(const std::string& name) {
    std::lock_guard lock(topics_mu_);
    auto& slot = topics_[name];
    if (!slot) slot = std::make_unique<Topic>();
    return *slot;
  }

  std::size_t default_capacity_;
  mutable std::mutex topics_mu_;
  std::map<std::string, std::unique_ptr<Topic>> topics_;
};

using Bus = BasicBus<AgentMessage>;
using Subscription = Bus::Subscription;

}  // namespace smartpilot::runtime
