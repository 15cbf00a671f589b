// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pedtutor/core.hpp"
#include "pedtutor/gateway.hpp"

namespace pedtutor {

enum class PromptRole {
  TutorNormal,
  TutorPedagogical,
  Student,
  StudentAttempt,
  JudgeLeak,
  JudgeHelp,
  JudgeThinking,
  LabelSchoenfeld,
  LabelCodebook,
};

inline constexpr std::string_view kProblemPlaceholder = "{{ problem }}";

/// File name (relative to the prompt directory) backing each role.
std::string_view template_file_name(PromptRole role);

/// Directory holding the prompt files shipped with the sources.
std::filesystem::path default_prompt_dir();

/// Prompt templates loaded verbatim from disk.
class PromptLibrary {
 public:
  PromptLibrary() = default;

  /// Loads every template present in `dir`; missing files surface as
  /// UnknownTemplate when first requested.
  static PromptLibrary load(const std::filesystem::path& dir);
  static PromptLibrary load_default() { return load(default_prompt_dir()); }

  void set(PromptRole role, std::string text);
  bool has(PromptRole role) const;
  const std::string& raw(PromptRole role) const;

  /// Template with `{{ problem }}` replaced by the statement.
  /// Throws UnknownTemplate or EmptyProblem.
  std::string build(PromptRole role, const Problem& problem) const;

 private:
  std::map<PromptRole, std::string> templates_;
};

std::string substitute(std::string_view tmpl, std::string_view placeholder,
                       std::string_view value);

/// Tutor system prompt for a prompt style.
std::string build_system_prompt(const PromptLibrary& lib, PromptRole role,
                                const Problem& problem);
PromptRole tutor_role(PromptStyle style);

/// Messages the tutor sees before producing tutor turn `turn_index`
/// (0-based position in d.turns). Earlier tutor turns carry only their
/// visible text; student turns become user messages.
std::vector<ChatMessage> tutor_messages(const PromptLibrary& lib,
                                        const Condition& condition,
                                        const Problem& problem,
                                        const Dialogue& d, int turn_index);

/// Messages the student sees before producing student turn `turn_index`.
/// Tutor thinking never appears here.
std::vector<ChatMessage> student_messages(const PromptLibrary& lib,
                                          const Problem& problem,
                                          const Dialogue& d, int turn_index);

/// Solo attempt: student persona, optional prior dialogue (visible only),
/// then the attempt instruction.
std::vector<ChatMessage> attempt_messages(const PromptLibrary& lib,
                                          const Problem& problem,
                                          const Dialogue* prior);

}  // namespace pedtutor
