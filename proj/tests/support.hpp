// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "pedtutor/mock.hpp"
#include "pedtutor/prompts.hpp"

namespace testing {

inline std::filesystem::path fixtures() { return PEDTUTOR_TEST_FIXTURES; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("pedtutor-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline pedtutor::EndpointConfig endpoint(const std::string& model) {
  pedtutor::EndpointConfig e;
  e.model_name = model;
  e.jitter = false;
  e.backoff_base = pedtutor::Millis(0);
  return e;
}

inline std::shared_ptr<pedtutor::MockBackend> backend(std::string_view playbook) {
  return std::make_shared<pedtutor::MockBackend>(pedtutor::parse_playbook(playbook));
}

inline std::shared_ptr<pedtutor::ChatClient> mock_client(
    const std::string& model, std::shared_ptr<pedtutor::MockBackend> b) {
  return pedtutor::make_mock_client(endpoint(model), std::move(b));
}

inline const pedtutor::PromptLibrary& prompts() {
  static const auto lib = pedtutor::PromptLibrary::load_default();
  return lib;
}

inline pedtutor::Problem problem(std::string id, std::string statement, std::string answer,
                                 std::optional<double> baseline = std::nullopt) {
  pedtutor::Problem p;
  p.id = std::move(id);
  p.statement = std::move(statement);
  p.reference_answer = std::move(answer);
  p.baseline_solve_rate = baseline;
  return p;
}

}  // namespace testing
