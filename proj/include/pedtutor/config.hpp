// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pedtutor/core.hpp"
#include "pedtutor/gateway.hpp"
#include "pedtutor/reward_types.hpp"

namespace pedtutor {

// Flat "key = value" file, '#' starts a comment line. Endpoint keys are
// prefixed with the role: tutor., student., judge., labeler.
struct RunConfig {
  EndpointConfig tutor;
  EndpointConfig student;
  EndpointConfig judge;
  EndpointConfig labeler;
  Condition condition = Condition::ped_think_reward();
  RewardWeights weights;
  int K = 8;
  int group_size = 8;
  int batch_problems = 16;
  int max_turns = 16;
  int parallelism = 8;
  std::int64_t seed = 0;
  std::string dataset;
  std::string run_dir;

  RunConfig();

  /// Throws RangeError.
  void validate() const;
};

/// Keys in snapshot order.
const std::vector<std::string>& config_keys();

/// Applies one key/value pair. Throws UnknownKey or RangeError.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

/// Parses config text on top of defaults. Throws ParseError, UnknownKey,
/// RangeError.
RunConfig parse_config(std::string_view text, RunConfig base = {});

/// Loads `path` (or defaults when empty), then applies "key=value"
/// overrides in order and validates.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

/// Canonical snapshot: every key in config_keys() order, "key = value".
std::string format_config(const RunConfig& cfg);

/// Throws MissingEndpoint when base_url is empty.
void require_endpoint(const EndpointConfig& e, std::string_view role);

}  // namespace pedtutor
