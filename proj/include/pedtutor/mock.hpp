// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedtutor/gateway.hpp"

namespace httplib {
class Server;
}

namespace pedtutor {

enum class MatchScope { Last, System, Any };

/// One scripted behaviour. All present predicates must hold.
struct MockRule {
  std::optional<std::string> model;
  std::optional<std::string> contains;
  MatchScope scope = MatchScope::Last;
  // Number of assistant messages already in the request.
  std::optional<int> turn;
  std::optional<std::int64_t> seed;

  // replies[seed mod size]; a request without seed takes replies[0].
  std::vector<std::string> replies;
  // Reply with the last message's content instead of `replies`.
  bool echo = false;
  // Failures injected per distinct request before success; -1 = always.
  int fail_count = 0;
  // 0 = transport failure, otherwise an HTTP status.
  int fail_status = 0;

  bool matches(const ChatRequest& req) const;
};

MockRule rule_from_json(const nlohmann::json& j);

using Playbook = std::vector<MockRule>;

/// One rule per line; blank lines and lines starting with '#' are skipped.
Playbook parse_playbook(std::string_view jsonl);
Playbook load_playbook(const std::filesystem::path& path);

/// Deterministic scripted backend: first matching rule wins. Replies depend
/// only on the request (never on call order), so concurrent use is
/// reproducible. Failure counters are kept per distinct request.
class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(Playbook playbook);

  std::string complete(const ChatRequest& req) override;

  std::size_t calls() const;

 private:
  Playbook playbook_;
  mutable std::mutex mu_;
  std::map<std::pair<std::size_t, std::string>, int> failures_;
  std::size_t calls_ = 0;
};

/// Serves a MockBackend on POST /v1/chat/completions.
/// Injected transport failures are answered with 503; unmatched requests
/// with 422.
class MockHttpServer {
 public:
  explicit MockHttpServer(std::shared_ptr<MockBackend> backend,
                          std::string host = "127.0.0.1", int port = 0);
  ~MockHttpServer();
  MockHttpServer(const MockHttpServer&) = delete;
  MockHttpServer& operator=(const MockHttpServer&) = delete;

  /// Starts listening on a background thread and waits until ready.
  void start();
  /// Blocks serving on the calling thread.
  void serve_forever();
  void stop();

  int port() const { return port_; }
  std::string base_url() const;

 private:
  void install_routes();

  std::shared_ptr<MockBackend> backend_;
  std::string host_;
  int port_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

/// Client over an in-process mock; retries never sleep.
std::shared_ptr<ChatClient> make_mock_client(EndpointConfig cfg,
                                             std::shared_ptr<MockBackend> backend,
                                             std::shared_ptr<JsonlLog> log = nullptr);

}  // namespace pedtutor
