// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/prompts.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pedtutor/error.hpp"

#ifndef PEDTUTOR_DATA_DIR
#define PEDTUTOR_DATA_DIR "data"
#endif

namespace pedtutor {

namespace {

constexpr PromptRole kAllRoles[] = {
    PromptRole::TutorNormal,     PromptRole::TutorPedagogical, PromptRole::Student,
    PromptRole::StudentAttempt,  PromptRole::JudgeLeak,        PromptRole::JudgeHelp,
    PromptRole::JudgeThinking,   PromptRole::LabelSchoenfeld,  PromptRole::LabelCodebook,
};

}  // namespace

std::string_view template_file_name(PromptRole role) {
  switch (role) {
    case PromptRole::TutorNormal: return "tutor_general.txt";
    case PromptRole::TutorPedagogical: return "tutor_pedagogical.txt";
    case PromptRole::Student: return "student.txt";
    case PromptRole::StudentAttempt: return "student_attempt.txt";
    case PromptRole::JudgeLeak: return "judge_leak.txt";
    case PromptRole::JudgeHelp: return "judge_help.txt";
    case PromptRole::JudgeThinking: return "judge_thinking.txt";
    case PromptRole::LabelSchoenfeld: return "label_schoenfeld.txt";
    case PromptRole::LabelCodebook: return "label_codebook.txt";
  }
  return "";
}

std::filesystem::path default_prompt_dir() {
  if (const char* env = std::getenv("PEDTUTOR_DATA_DIR"); env && *env) {
    return std::filesystem::path(env) / "prompts";
  }
  return std::filesystem::path(PEDTUTOR_DATA_DIR) / "prompts";
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  PromptLibrary lib;
  for (auto role : kAllRoles) {
    auto path = dir / template_file_name(role);
    std::ifstream in(path, std::ios::binary);
    if (!in) continue;
    std::ostringstream ss;
    ss << in.rdbuf();
    lib.templates_[role] = ss.str();
  }
  return lib;
}

void PromptLibrary::set(PromptRole role, std::string text) { templates_[role] = std::move(text); }

bool PromptLibrary::has(PromptRole role) const { return templates_.count(role) != 0; }

const std::string& PromptLibrary::raw(PromptRole role) const {
  auto it = templates_.find(role);
  if (it == templates_.end()) {
    throw UnknownTemplate("prompt template '" + std::string(template_file_name(role)) +
                          "' not loaded");
  }
  return it->second;
}

std::string PromptLibrary::build(PromptRole role, const Problem& problem) const {
  const auto& tmpl = raw(role);
  if (trim(problem.statement).empty()) {
    throw EmptyProblem("problem '" + problem.id + "' has an empty statement");
  }
  return substitute(tmpl, kProblemPlaceholder, problem.statement);
}

std::string substitute(std::string_view tmpl, std::string_view placeholder,
                       std::string_view value) {
  std::string out;
  out.reserve(tmpl.size() + value.size());
  std::size_t from = 0;
  for (auto pos = tmpl.find(placeholder); pos != std::string_view::npos;
       pos = tmpl.find(placeholder, from)) {
    out.append(tmpl.substr(from, pos - from)).append(value);
    from = pos + placeholder.size();
  }
  out.append(tmpl.substr(from));
  return out;
}

std::string build_system_prompt(const PromptLibrary& lib, PromptRole role,
                                const Problem& problem) {
  return lib.build(role, problem);
}

PromptRole tutor_role(PromptStyle style) {
  return style == PromptStyle::Pedagogical ? PromptRole::TutorPedagogical
                                           : PromptRole::TutorNormal;
}

std::vector<ChatMessage> tutor_messages(const PromptLibrary& lib, const Condition& condition,
                                        const Problem& problem, const Dialogue& d,
                                        int turn_index) {
  std::vector<ChatMessage> msgs;
  msgs.push_back({Role::System, lib.build(tutor_role(condition.prompt_style), problem)});
  for (int i = 0; i < turn_index && i < static_cast<int>(d.turns.size()); ++i) {
    const auto& t = d.turns[static_cast<std::size_t>(i)];
    msgs.push_back({t.speaker == Speaker::Tutor ? Role::Assistant : Role::User, t.visible_text});
  }
  return msgs;
}

std::vector<ChatMessage> student_messages(const PromptLibrary& lib, const Problem& problem,
                                          const Dialogue& d, int turn_index) {
  std::vector<ChatMessage> msgs;
  msgs.push_back({Role::System, lib.build(PromptRole::Student, problem)});
  for (int i = 0; i < turn_index && i < static_cast<int>(d.turns.size()); ++i) {
    const auto& t = d.turns[static_cast<std::size_t>(i)];
    msgs.push_back({t.speaker == Speaker::Tutor ? Role::User : Role::Assistant, t.visible_text});
  }
  return msgs;
}

std::vector<ChatMessage> attempt_messages(const PromptLibrary& lib, const Problem& problem,
                                          const Dialogue* prior) {
  std::vector<ChatMessage> msgs;
  if (prior) {
    msgs = student_messages(lib, problem, *prior, static_cast<int>(prior->turns.size()));
  } else {
    msgs.push_back({Role::System, lib.build(PromptRole::Student, problem)});
  }
  msgs.push_back({Role::User, lib.build(PromptRole::StudentAttempt, problem)});
  return msgs;
}

}  // namespace pedtutor
