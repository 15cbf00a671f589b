// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/gateway.hpp"

#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "pedtutor/error.hpp"

namespace pedtutor {

using nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw ParseError("unknown chat role '" + std::string(s) + "'");
}

void EndpointConfig::validate() const {
  if (!(temperature >= 0.0)) throw RangeError("temperature must be >= 0");
  if (max_tokens <= 0) throw RangeError("max_tokens must be positive");
  if (max_retries < 0) throw RangeError("max_retries must be >= 0");
  if (backoff_base.count() < 0) throw RangeError("backoff must be >= 0");
  if (request_timeout.count() <= 0) throw RangeError("request timeout must be positive");
  if (max_in_flight <= 0) throw RangeError("max_in_flight must be positive");
}

json to_wire(const ChatRequest& req) {
  json msgs = json::array();
  for (const auto& m : req.messages) {
    msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body = {{"model", req.model},
               {"messages", std::move(msgs)},
               {"temperature", req.temperature},
               {"max_tokens", req.max_tokens}};
  if (req.seed) body["seed"] = *req.seed;
  return body;
}

ChatRequest request_from_wire(const json& body) {
  ChatRequest req;
  try {
    req.model = body.value("model", "");
    for (const auto& m : body.at("messages")) {
      req.messages.push_back(
          {role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    }
    req.temperature = body.value("temperature", 0.0);
    req.max_tokens = body.value("max_tokens", 1024);
    if (body.contains("seed") && !body["seed"].is_null()) req.seed = body["seed"].get<std::int64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed chat request: ") + e.what());
  }
  return req;
}

json response_to_wire(std::string_view model, std::string_view content) {
  return {{"object", "chat.completion"},
          {"model", model},
          {"choices",
           json::array({{{"index", 0},
                         {"message", {{"role", "assistant"}, {"content", content}}},
                         {"finish_reason", "stop"}}})}};
}

std::string content_from_wire(const json& body) {
  try {
    const auto& content = body.at("choices").at(0).at("message").at("content");
    if (content.is_null()) throw EmptyCompletion("completion content is null");
    auto text = content.get<std::string>();
    if (text.empty()) throw EmptyCompletion("completion content is empty");
    return text;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed chat response: ") + e.what());
  }
}

// --- HttpBackend -----------------------------------------------------------

HttpBackend::HttpBackend(std::string base_url, std::string api_key, Millis timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  auto scheme_end = base_url.find("://");
  auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_begin = base_url.find('/', host_begin);
  scheme_host_port_ = base_url.substr(0, path_begin);
  if (path_begin != std::string::npos) path_prefix_ = base_url.substr(path_begin);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpBackend::complete(const ChatRequest& req) {
  httplib::Client cli(scheme_host_port_);
  if (!cli.is_valid()) throw TransportError("invalid endpoint url '" + scheme_host_port_ + "'");
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = cli.Post(path_prefix_ + "/v1/chat/completions", headers, to_wire(req).dump(),
                      "application/json");
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw HttpError(res->status, "HTTP " + std::to_string(res->status) + ": " +
                                     res->body.substr(0, 512));
  }
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("unparseable response body: ") + e.what());
  }
  return content_from_wire(body);
}

// --- JsonlLog --------------------------------------------------------------

JsonlLog::JsonlLog(const std::filesystem::path& path, bool append) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw IoError("cannot open log '" + path.string() + "'");
}

void JsonlLog::write(const json& record) {
  if (!out_.is_open()) return;
  auto line = record.dump();
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
}

// --- retry + client --------------------------------------------------------

std::vector<Millis> retry_schedule(int max_retries, Millis backoff_base) {
  if (max_retries < 0) throw PreconditionError("max_retries must be >= 0");
  std::vector<Millis> delays;
  delays.reserve(static_cast<std::size_t>(max_retries));
  for (int i = 0; i < max_retries; ++i) delays.push_back(backoff_base * (std::int64_t{1} << i));
  return delays;
}

namespace {

std::string timestamp_now() {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0')
     << ms.count() << 'Z';
  return ss.str();
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

struct SemaphoreGuard {
  explicit SemaphoreGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
  std::counting_semaphore<>& sem;
};

}  // namespace

ChatClient::ChatClient(EndpointConfig cfg, std::shared_ptr<ChatBackend> backend,
                       std::shared_ptr<JsonlLog> log, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      backend_(std::move(backend)),
      log_(std::move(log)),
      sleeper_(std::move(sleeper)),
      in_flight_(std::make_shared<std::counting_semaphore<>>(cfg_.max_in_flight)) {
  cfg_.validate();
  if (!backend_) throw PreconditionError("chat client needs a backend");
  if (!sleeper_) sleeper_ = [](Millis d) { std::this_thread::sleep_for(d); };
}

Millis ChatClient::jittered(Millis d) const {
  if (!cfg_.jitter || d.count() == 0) return d;
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> factor(0.8, 1.2);
  return Millis(static_cast<std::int64_t>(static_cast<double>(d.count()) * factor(rng)));
}

ChatResult ChatClient::chat(std::span<const ChatMessage> messages,
                            std::optional<std::int64_t> seed) const {
  if (messages.empty()) throw PreconditionError("chat() needs at least one message");
  if (messages.front().role != Role::System) {
    throw PreconditionError("chat() expects the first message to be a system message");
  }
  ChatRequest req{cfg_.model_name, {messages.begin(), messages.end()}, cfg_.temperature,
                  cfg_.max_tokens, seed};
  const auto delays = retry_schedule(cfg_.max_retries, cfg_.backoff_base);
  const int max_attempts = 1 + cfg_.max_retries;

  auto audit = [&](int attempt, const std::string* content, const std::string* error) {
    if (!log_ || !log_->enabled()) return;
    json rec = {{"ts", timestamp_now()},
                {"endpoint", cfg_.base_url},
                {"model", cfg_.model_name},
                {"attempt", attempt},
                {"request", to_wire(req)}};
    if (content) rec["response"] = *content;
    if (error) rec["error"] = *error;
    log_->write(rec);
  };

  std::exception_ptr last;
  std::string last_message;
  bool last_was_transport = false;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    try {
      std::string content;
      {
        SemaphoreGuard guard(*in_flight_);
        content = backend_->complete(req);
      }
      if (content.empty()) throw EmptyCompletion("completion content is empty");
      audit(attempt, &content, nullptr);
      return {std::move(content), attempt};
    } catch (const HttpError& e) {
      audit(attempt, nullptr, &last_message.assign(e.what()));
      if (!retryable_status(e.status())) throw;
      last = std::current_exception();
      last_was_transport = false;
    } catch (const TransportError& e) {
      audit(attempt, nullptr, &last_message.assign(e.what()));
      last = std::current_exception();
      last_was_transport = true;
    } catch (const EmptyCompletion& e) {
      audit(attempt, nullptr, &last_message.assign(e.what()));
      last = std::current_exception();
      last_was_transport = false;
    }
    if (attempt < max_attempts) {
      auto d = jittered(delays[static_cast<std::size_t>(attempt - 1)]);
      spdlog::debug("{}: attempt {} failed ({}), retrying in {}ms", cfg_.model_name, attempt,
                    last_message, d.count());
      sleeper_(d);
    }
  }
  if (last_was_transport) {
    throw TransportError(cfg_.model_name + ": giving up after " + std::to_string(max_attempts) +
                         " attempts: " + last_message);
  }
  std::rethrow_exception(last);
}

std::shared_ptr<ChatClient> make_http_client(const EndpointConfig& cfg,
                                             std::shared_ptr<JsonlLog> log) {
  std::string key;
  if (!cfg.api_key_env.empty()) {
    if (const char* v = std::getenv(cfg.api_key_env.c_str()); v && *v) {
      key = v;
    } else {
      spdlog::warn("environment variable {} is not set; sending requests without a token",
                   cfg.api_key_env);
    }
  }
  auto backend = std::make_shared<HttpBackend>(cfg.base_url, std::move(key), cfg.request_timeout);
  return std::make_shared<ChatClient>(cfg, std::move(backend), std::move(log));
}

}  // namespace pedtutor
