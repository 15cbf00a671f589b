// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/mock.hpp"

#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "pedtutor/core.hpp"
#include "pedtutor/error.hpp"
#include "pedtutor/jsonl.hpp"

namespace pedtutor {

using nlohmann::json;

bool MockRule::matches(const ChatRequest& req) const {
  if (model && *model != req.model) return false;
  if (seed && (!req.seed || *req.seed != *seed)) return false;
  if (turn) {
    int assistant = 0;
    for (const auto& m : req.messages) assistant += m.role == Role::Assistant ? 1 : 0;
    if (assistant != *turn) return false;
  }
  if (contains) {
    auto has = [&](const ChatMessage& m) { return m.content.find(*contains) != std::string::npos; };
    switch (scope) {
      case MatchScope::Last:
        if (req.messages.empty() || !has(req.messages.back())) return false;
        break;
      case MatchScope::System:
        if (req.messages.empty() || !has(req.messages.front())) return false;
        break;
      case MatchScope::Any: {
        bool any = false;
        for (const auto& m : req.messages) any = any || has(m);
        if (!any) return false;
        break;
      }
    }
  }
  return true;
}

MockRule rule_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("mock rule must be a JSON object");
  MockRule r;
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      r.model = value.get<std::string>();
    } else if (key == "contains") {
      r.contains = value.get<std::string>();
    } else if (key == "scope") {
      auto s = value.get<std::string>();
      if (s == "last") r.scope = MatchScope::Last;
      else if (s == "system") r.scope = MatchScope::System;
      else if (s == "any") r.scope = MatchScope::Any;
      else throw ParseError("unknown mock scope '" + s + "'");
    } else if (key == "turn") {
      r.turn = value.get<int>();
    } else if (key == "seed") {
      r.seed = value.get<std::int64_t>();
    } else if (key == "reply") {
      r.replies = {value.get<std::string>()};
    } else if (key == "replies") {
      r.replies = value.get<std::vector<std::string>>();
    } else if (key == "echo") {
      r.echo = value.get<bool>();
    } else if (key == "fail_count") {
      r.fail_count = value.get<int>();
    } else if (key == "fail_status") {
      r.fail_status = value.get<int>();
    } else if (key == "comment") {
      // free-form annotation
    } else {
      throw ParseError("unknown mock rule field '" + key + "'");
    }
  }
  if (r.replies.empty() && !r.echo && r.fail_count >= 0) {
    throw ParseError("mock rule needs reply, replies, echo or fail_count=-1");
  }
  return r;
}

Playbook parse_playbook(std::string_view jsonl) {
  Playbook pb;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    try {
      pb.push_back(rule_from_json(json::parse(t)));
    } catch (const json::exception& e) {
      throw ParseError("playbook line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("playbook line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (pb.empty()) throw PreconditionError("mock playbook is empty");
  return pb;
}

Playbook load_playbook(const std::filesystem::path& path) { return parse_playbook(read_file(path)); }

MockBackend::MockBackend(Playbook playbook) : playbook_(std::move(playbook)) {
  if (playbook_.empty()) throw PreconditionError("mock playbook is empty");
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::string MockBackend::complete(const ChatRequest& req) {
  {
    std::lock_guard lock(mu_);
    ++calls_;
  }
  for (std::size_t i = 0; i < playbook_.size(); ++i) {
    const auto& rule = playbook_[i];
    if (!rule.matches(req)) continue;

    if (rule.fail_count != 0) {
      std::lock_guard lock(mu_);
      int& failed = failures_[{i, to_wire(req).dump()}];
      if (rule.fail_count < 0 || failed < rule.fail_count) {
        ++failed;
        if (rule.fail_status != 0) {
          throw HttpError(rule.fail_status, "injected HTTP " + std::to_string(rule.fail_status));
        }
        throw TransportError("injected transport failure");
      }
    }
    if (rule.echo) return req.messages.empty() ? std::string() : req.messages.back().content;
    auto n = static_cast<std::int64_t>(rule.replies.size());
    auto s = req.seed.value_or(0);
    return rule.replies[static_cast<std::size_t>(((s % n) + n) % n)];
  }
  std::string last = req.messages.empty() ? "" : req.messages.back().content.substr(0, 80);
  throw NoMatchingRule("no mock rule matches model='" + req.model + "' last='" + last + "'");
}

// --- HTTP server -----------------------------------------------------------

MockHttpServer::MockHttpServer(std::shared_ptr<MockBackend> backend, std::string host, int port)
    : backend_(std::move(backend)),
      host_(std::move(host)),
      port_(port),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

MockHttpServer::~MockHttpServer() { stop(); }

void MockHttpServer::install_routes() {
  server_->Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
    auto fail = [&](int status, const std::string& msg) {
      res.status = status;
      res.set_content(json{{"error", {{"message", msg}}}}.dump(), "application/json");
    };
    try {
      auto chat = request_from_wire(json::parse(req.body));
      auto content = backend_->complete(chat);
      res.set_content(response_to_wire(chat.model, content).dump(), "application/json");
    } catch (const HttpError& e) {
      fail(e.status(), e.what());
    } catch (const TransportError& e) {
      fail(503, e.what());
    } catch (const NoMatchingRule& e) {
      fail(422, e.what());
    } catch (const std::exception& e) {
      fail(400, e.what());
    }
  });
}

void MockHttpServer::start() {
  if (port_ == 0) {
    port_ = server_->bind_to_any_port(host_);
  } else if (!server_->bind_to_port(host_, port_)) {
    throw IoError("mock server cannot bind " + host_ + ":" + std::to_string(port_));
  }
  if (port_ <= 0) throw IoError("mock server cannot bind " + host_);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockHttpServer::serve_forever() {
  if (port_ == 0) {
    port_ = server_->bind_to_any_port(host_);
  } else if (!server_->bind_to_port(host_, port_)) {
    throw IoError("mock server cannot bind " + host_ + ":" + std::to_string(port_));
  }
  spdlog::info("mock endpoint listening on {}", base_url());
  server_->listen_after_bind();
}

void MockHttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockHttpServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

std::shared_ptr<ChatClient> make_mock_client(EndpointConfig cfg,
                                             std::shared_ptr<MockBackend> backend,
                                             std::shared_ptr<JsonlLog> log) {
  if (cfg.base_url.empty()) cfg.base_url = "mock://";
  return std::make_shared<ChatClient>(std::move(cfg), std::move(backend), std::move(log),
                                      [](Millis) {});
}

}  // namespace pedtutor
