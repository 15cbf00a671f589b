// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pedtutor {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kEndMarker = "<end_of_conversation>";

struct Problem {
  std::string id;
  std::string statement;
  std::string reference_answer;
  std::optional<double> baseline_solve_rate;
  std::vector<std::string> tags;
};

enum class Speaker { Tutor, Student };

struct DialogueTurn {
  Speaker speaker = Speaker::Tutor;
  std::string think_text;
  std::string visible_text;
  bool end_flag = false;
  int turn_index = 0;
  // Tutor only: `<think>` opened without a matching close.
  bool malformed_think = false;
  // Tutor only: `<think>` occurrences after the first span, left in visible_text.
  int extra_think_spans = 0;
};

enum class Termination { EndMarker, MaxTurns, Error };

struct Dialogue {
  std::string problem_id;
  std::string condition_id;
  std::vector<DialogueTurn> turns;
  Termination termination = Termination::MaxTurns;
  std::int64_t seed = 0;
  // Raw completion per turn, parallel to `turns`.
  std::vector<std::string> raw;
  // Set when termination == Error.
  std::string error;

  int tutor_turn_count() const;
};

enum class PromptStyle { Normal, Pedagogical };

struct Condition {
  std::string name;
  bool thinking_enabled = true;
  PromptStyle prompt_style = PromptStyle::Normal;
  bool thinking_reward_enabled = false;

  /// Throws PreconditionError when thinking_reward_enabled && !thinking_enabled.
  void validate() const;

  static Condition no_think();
  static Condition think_no_reward();
  static Condition think_reward();
  static Condition ped_think_no_reward();
  static Condition ped_think_reward();
  static std::vector<Condition> all_presets();
  /// Looks up a preset by name ("nothink", "think-reward", ...).
  static Condition preset(std::string_view name);
};

struct ParsedTutorOutput {
  std::string think_text;
  std::string visible_text;
  bool end_flag = false;
  bool malformed_think = false;
  int extra_think_spans = 0;
};

/// Splits a raw tutor completion into its thinking span, student-facing text
/// and end-of-conversation flag. Only the first `<think>...</think>` span is
/// thinking; the end marker is honoured only outside it. An unterminated
/// `<think>` yields the remaining text as thinking, empty visible text and
/// `malformed_think = true`. A lone `</think>` (opening tag prefilled by the
/// chat template) treats everything before it as thinking.
ParsedTutorOutput parse_tutor_output(std::string_view raw, bool thinking_enabled);

/// Inverse of parse_tutor_output for tag-free, trimmed contents.
std::string format_tutor_output(std::string_view think_text,
                                std::string_view visible_text, bool end_flag);

DialogueTurn make_tutor_turn(const ParsedTutorOutput& parsed, int turn_index);
DialogueTurn make_student_turn(std::string visible_text, int turn_index);

enum class TranscriptView { VisibleOnly, WithThinking };

/// Speaker-labelled transcript ("Teacher: ...", "Student: ..."), one turn per
/// line. `upto_turn` limits output to turns with index <= upto_turn.
std::string render_transcript(const Dialogue& d, TranscriptView view,
                              std::optional<int> upto_turn = std::nullopt);

/// Checks alternation, turn indices and termination consistency.
/// Throws InvalidDialogue.
void validate_dialogue(const Dialogue& d, std::optional<int> max_turns = std::nullopt);

std::string_view to_string(Speaker s);
std::string_view to_string(Termination t);
std::string_view to_string(PromptStyle s);
Speaker speaker_from_string(std::string_view s);
Termination termination_from_string(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace pedtutor
