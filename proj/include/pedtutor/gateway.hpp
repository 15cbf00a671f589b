// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pedtutor {

using Millis = std::chrono::milliseconds;

enum class Role { System, User, Assistant };

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  // Name of the environment variable holding the bearer token; empty = none.
  std::string api_key_env;
  double temperature = 0.0;
  int max_tokens = 1024;
  Millis request_timeout{120000};
  int max_retries = 5;
  Millis backoff_base{1000};
  // ±20% multiplicative jitter on each backoff delay.
  bool jitter = true;
  // Cap on concurrent in-flight requests through one client.
  int max_in_flight = 16;

  /// Throws RangeError.
  void validate() const;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;
};

/// OpenAI-compatible chat-completions request body.
nlohmann::json to_wire(const ChatRequest& req);
ChatRequest request_from_wire(const nlohmann::json& body);
/// Builds a response body carrying `content` in choices[0].message.content.
nlohmann::json response_to_wire(std::string_view model, std::string_view content);
/// Extracts choices[0].message.content; throws EmptyCompletion / ParseError.
std::string content_from_wire(const nlohmann::json& body);

/// One completion attempt. Implementations throw TransportError, HttpError,
/// EmptyCompletion or NoMatchingRule; ChatClient decides what to retry.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& req) = 0;
};

class HttpBackend final : public ChatBackend {
 public:
  HttpBackend(std::string base_url, std::string api_key, Millis timeout);
  std::string complete(const ChatRequest& req) override;

 private:
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string api_key_;
  Millis timeout_;
};

/// Append-only JSONL sink shared by concurrent writers.
class JsonlLog {
 public:
  JsonlLog() = default;  // discarding sink
  explicit JsonlLog(const std::filesystem::path& path, bool append = true);

  void write(const nlohmann::json& record);
  bool enabled() const { return out_.is_open(); }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

struct ChatResult {
  std::string content;
  int attempts = 1;
};

using Sleeper = std::function<void(Millis)>;

/// Delays before retry 1..max_retries: base * 2^i.
std::vector<Millis> retry_schedule(int max_retries, Millis backoff_base);

/// Thread-safe client around one endpoint: retries with exponential backoff,
/// caps in-flight requests, and audits every attempt to the request log.
class ChatClient {
 public:
  ChatClient(EndpointConfig cfg, std::shared_ptr<ChatBackend> backend,
             std::shared_ptr<JsonlLog> log = nullptr, Sleeper sleeper = {});

  /// messages must be non-empty and start with a System message.
  ChatResult chat(std::span<const ChatMessage> messages,
                  std::optional<std::int64_t> seed = std::nullopt) const;

  const EndpointConfig& config() const { return cfg_; }

 private:
  Millis jittered(Millis d) const;

  EndpointConfig cfg_;
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<JsonlLog> log_;
  Sleeper sleeper_;
  std::shared_ptr<std::counting_semaphore<>> in_flight_;
};

/// Client talking HTTP to cfg.base_url; the bearer token is read from
/// cfg.api_key_env at construction.
std::shared_ptr<ChatClient> make_http_client(const EndpointConfig& cfg,
                                             std::shared_ptr<JsonlLog> log = nullptr);

}  // namespace pedtutor
