#pragma once

// Chat-completions client shared by every external model role. The wire
// format is the OpenAI-compatible `/v1/chat/completions` JSON body; the
// transport is pluggable so tests run against deterministic mocks.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mentra/error.hpp"
#include "mentra/text.hpp"

namespace mentra::gateway {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::size_t max_tokens = 1024;

  void check() const {
    if (messages.empty()) throw Error(Errc::ConfigError, "chat request needs at least one message");
    if (!(temperature >= 0.0)) throw Error(Errc::ConfigError, "chat request temperature must be >= 0");
  }
};

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t total_tokens = 0;
};

struct ChatResponse {
  std::string text;
  Usage usage;
};

struct ClientPolicy {
  std::chrono::milliseconds timeout{60000};
  std::size_t max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::size_t concurrency_cap = 4;

  void check() const {
    if (concurrency_cap < 1) throw Error(Errc::ConfigError, "gateway: concurrency cap must be >= 1");
    if (timeout.count() <= 0) throw Error(Errc::ConfigError, "gateway: timeout must be > 0");
    if (backoff_base.count() < 0) throw Error(Errc::ConfigError, "gateway: backoff must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

inline constexpr std::string_view kChatPath = "/v1/chat/completions";

inline nlohmann::json encode_request(const ChatRequest& req) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", req.model},
          {"messages", std::move(msgs)},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens}};
}

inline ChatResponse decode_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ProtocolError, std::string("response is not JSON: ") + e.what());
  }
  const auto* content = [&]() -> const nlohmann::json* {
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) return nullptr;
    const auto& c = j["choices"][0];
    if (!c.is_object() || !c.contains("message") || !c["message"].is_object()) return nullptr;
    const auto& m = c["message"];
    if (!m.contains("content") || !m["content"].is_string()) return nullptr;
    return &m["content"];
  }();
  if (!content) throw Error(Errc::ProtocolError, "response has no choices[0].message.content string");
  ChatResponse out;
  out.text = content->get<std::string>();
  if (j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    out.usage.prompt_tokens = u.value("prompt_tokens", std::size_t{0});
    out.usage.completion_tokens = u.value("completion_tokens", std::size_t{0});
    out.usage.total_tokens = u.value("total_tokens", out.usage.prompt_tokens + out.usage.completion_tokens);
  }
  return out;
}

inline std::string make_response_body(std::string_view text, Usage usage = {}) {
  return nlohmann::json{{"choices", {{{"index", 0},
                                      {"message", {{"role", "assistant"}, {"content", text}}},
                                      {"finish_reason", "stop"}}}},
                        {"usage",
                         {{"prompt_tokens", usage.prompt_tokens},
                          {"completion_tokens", usage.completion_tokens},
                          {"total_tokens", usage.total_tokens}}}}
      .dump();
}

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

struct TransportReply {
  enum class Kind { Ok, Timeout, ConnectionError };
  Kind kind = Kind::Ok;
  int status = 200;
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply post(std::string_view path, const std::string& body,
                              std::chrono::milliseconds timeout) = 0;
};

/// Replies with the content of the request's last message.
class EchoTransport final : public Transport {
 public:
  TransportReply post(std::string_view, const std::string& body, std::chrono::milliseconds) override {
    const auto j = nlohmann::json::parse(body);
    const auto text = j.at("messages").back().at("content").get<std::string>();
    Usage u;
    for (const auto& m : j.at("messages")) u.prompt_tokens += text::count_whitespace_tokens(m.at("content").get<std::string>());
    u.completion_tokens = text::count_whitespace_tokens(text);
    u.total_tokens = u.prompt_tokens + u.completion_tokens;
    ++calls_;
    return {TransportReply::Kind::Ok, 200, make_response_body(text, u)};
  }
  std::size_t calls() const noexcept { return calls_; }

 private:
  std::atomic<std::size_t> calls_{0};
};

/// Plays back a fixed list of replies, repeating the last one. Tracks call
/// count and peak concurrency; an optional per-call delay widens the window
/// in which concurrent calls overlap.
class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(std::vector<TransportReply> script, std::chrono::milliseconds delay = {})
      : script_(std::move(script)), delay_(delay) {
    if (script_.empty()) throw Error(Errc::ConfigError, "scripted transport needs at least one reply");
  }

  TransportReply post(std::string_view, const std::string& body, std::chrono::milliseconds) override {
    const auto now = ++in_flight_;
    auto peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    TransportReply reply;
    {
      std::lock_guard lock(mu_);
      reply = script_[std::min(calls_, script_.size() - 1)];
      ++calls_;
      bodies_.push_back(body);
    }
    --in_flight_;
    return reply;
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::size_t peak_in_flight() const noexcept { return peak_.load(); }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mu_);
    return bodies_;
  }

  static TransportReply ok(std::string_view text) { return {TransportReply::Kind::Ok, 200, make_response_body(text)}; }
  static TransportReply status(int code, std::string body = "{}") {
    return {TransportReply::Kind::Ok, code, std::move(body)};
  }
  static TransportReply timeout() { return {TransportReply::Kind::Timeout, 0, {}}; }
  static TransportReply unreachable() { return {TransportReply::Kind::ConnectionError, 0, {}}; }

 private:
  std::vector<TransportReply> script_;
  std::chrono::milliseconds delay_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
  std::vector<std::string> bodies_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_{0};
};

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

class ChatClient {
 public:
  ChatClient(std::shared_ptr<Transport> transport, ClientPolicy policy, Sleeper sleeper = real_sleep)
      : transport_(std::move(transport)), policy_(policy), sleep_(std::move(sleeper)) {
    policy_.check();
    if (!transport_) throw Error(Errc::ConfigError, "chat client needs a transport");
  }

  const ClientPolicy& policy() const noexcept { return policy_; }

  /// Sends one request. Transport failures, 429 and 5xx are retried with
  /// backoff base * 2^k; 401/403 and malformed bodies fail immediately.
  ChatResponse complete(const ChatRequest& req) {
    req.check();
    const auto body = encode_request(req).dump();
    Slot slot(*this);

    bool last_timeout = false;
    int last_status = 0;
    for (std::size_t attempt = 0; attempt <= policy_.max_retries; ++attempt) {
      if (attempt > 0) sleep_(policy_.backoff_base * (std::int64_t{1} << std::min<std::size_t>(attempt - 1, 20)));
      const auto reply = transport_->post(kChatPath, body, policy_.timeout);
      last_timeout = reply.kind == TransportReply::Kind::Timeout;
      if (reply.kind != TransportReply::Kind::Ok) continue;
      last_status = reply.status;
      if (reply.status == 401 || reply.status == 403)
        throw Error(Errc::AuthError, "endpoint rejected the credential (HTTP " + std::to_string(reply.status) + ")");
      if (reply.status == 429 || reply.status >= 500) continue;
      if (reply.status < 200 || reply.status >= 300)
        throw Error(Errc::ProtocolError, "unexpected HTTP " + std::to_string(reply.status));
      return decode_response(reply.body);
    }
    const auto tries = std::to_string(policy_.max_retries + 1);
    if (last_timeout) throw Error(Errc::Timeout, "request timed out after " + tries + " attempts");
    throw Error(Errc::RetriesExhausted, "request failed after " + tries + " attempts" +
                                            (last_status ? " (last HTTP " + std::to_string(last_status) + ")" : ""));
  }

  /// Convenience: system + user prompt, returns the assistant text.
  std::string ask(const std::string& model, const std::string& system, const std::string& user,
                  double temperature = 0.0) {
    ChatRequest req;
    req.model = model;
    if (!system.empty()) req.messages.push_back({"system", system});
    req.messages.push_back({"user", user});
    req.temperature = temperature;
    return complete(req).text;
  }

  std::size_t in_flight() const {
    std::lock_guard lock(mu_);
    return in_flight_;
  }

 private:
  struct Slot {
    explicit Slot(ChatClient& c) : client(c) {
      std::unique_lock lock(c.mu_);
      c.cv_.wait(lock, [&] { return c.in_flight_ < c.policy_.concurrency_cap; });
      ++c.in_flight_;
    }
    ~Slot() {
      {
        std::lock_guard lock(client.mu_);
        --client.in_flight_;
      }
      client.cv_.notify_one();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;
    ChatClient& client;
  };

  std::shared_ptr<Transport> transport_;
  ClientPolicy policy_;
  Sleeper sleep_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
};

/// Endpoint settings as they appear in the engine config.
struct GatewaySettings {
  std::string base_url = "http://127.0.0.1:8000";
  std::int64_t timeout_ms = 60000;
  std::string model = "gpt-4o";
  std::string judge_model = "gpt-4o";
  std::size_t max_retries = 3;
  std::int64_t backoff_ms = 500;
  std::size_t concurrency = 4;
  std::string api_key_env = "MENTRA_API_KEY";

  ClientPolicy policy() const {
    ClientPolicy p;
    p.timeout = std::chrono::milliseconds(timeout_ms);
    p.max_retries = max_retries;
    p.backoff_base = std::chrono::milliseconds(backoff_ms);
    p.concurrency_cap = concurrency;
    return p;
  }

  void check() const {
    if (base_url.empty()) throw Error(Errc::ConfigError, "gateway: base_url is empty");
    if (model.empty()) throw Error(Errc::ConfigError, "gateway: model is empty");
    policy().check();
  }
};

}  // namespace mentra::gateway
