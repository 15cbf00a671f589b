// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pedtutor {

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Parses every non-blank line. With `tolerate_truncated_tail`, an
/// unparseable final line without a trailing newline is dropped.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path,
                                       bool tolerate_truncated_tail = false);
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& records);

}  // namespace pedtutor
