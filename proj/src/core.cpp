// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/core.hpp"

#include <algorithm>
#include <cctype>

#include "pedtutor/error.hpp"

namespace pedtutor {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

int count_occurrences(std::string_view hay, std::string_view needle) {
  int n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string erase_all(std::string s, std::string_view needle) {
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos)) {
    s.erase(pos, needle.size());
  }
  return s;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

int Dialogue::tutor_turn_count() const {
  return static_cast<int>(std::count_if(turns.begin(), turns.end(), [](const DialogueTurn& t) {
    return t.speaker == Speaker::Tutor;
  }));
}

void Condition::validate() const {
  if (thinking_reward_enabled && !thinking_enabled) {
    throw PreconditionError("condition '" + name +
                            "': thinking reward requires thinking to be enabled");
  }
}

Condition Condition::no_think() { return {"nothink", false, PromptStyle::Normal, false}; }
Condition Condition::think_no_reward() {
  return {"think-noreward", true, PromptStyle::Normal, false};
}
Condition Condition::think_reward() { return {"think-reward", true, PromptStyle::Normal, true}; }
Condition Condition::ped_think_no_reward() {
  return {"ped-think-noreward", true, PromptStyle::Pedagogical, false};
}
Condition Condition::ped_think_reward() {
  return {"ped-think-reward", true, PromptStyle::Pedagogical, true};
}

std::vector<Condition> Condition::all_presets() {
  return {no_think(), think_no_reward(), think_reward(), ped_think_no_reward(),
          ped_think_reward()};
}

Condition Condition::preset(std::string_view name) {
  for (auto& c : all_presets()) {
    if (c.name == name) return c;
  }
  throw RangeError("unknown condition '" + std::string(name) +
                   "' (expected nothink, think-noreward, think-reward, "
                   "ped-think-noreward, ped-think-reward)");
}

ParsedTutorOutput parse_tutor_output(std::string_view raw, bool thinking_enabled) {
  ParsedTutorOutput out;
  std::string visible;

  if (!thinking_enabled) {
    visible = std::string(raw);
  } else if (auto open = raw.find(kThinkOpen); open != std::string_view::npos) {
    auto body = open + kThinkOpen.size();
    auto close = raw.find(kThinkClose, body);
    if (close == std::string_view::npos) {
      out.think_text = trim(std::string(raw.substr(0, open)) + std::string(raw.substr(body)));
      out.malformed_think = true;
      return out;
    }
    out.think_text = trim(raw.substr(body, close - body));
    visible = std::string(raw.substr(0, open)) +
              std::string(raw.substr(close + kThinkClose.size()));
  } else if (auto close = raw.find(kThinkClose); close != std::string_view::npos) {
    out.think_text = trim(raw.substr(0, close));
    visible = std::string(raw.substr(close + kThinkClose.size()));
  } else {
    visible = std::string(raw);
  }

  if (visible.find(kEndMarker) != std::string::npos) {
    out.end_flag = true;
    visible = erase_all(std::move(visible), kEndMarker);
  }
  if (thinking_enabled) out.extra_think_spans = count_occurrences(visible, kThinkOpen);
  out.visible_text = trim(visible);
  return out;
}

std::string format_tutor_output(std::string_view think_text, std::string_view visible_text,
                                bool end_flag) {
  std::string out;
  if (!think_text.empty()) {
    out.append(kThinkOpen).append(think_text).append(kThinkClose);
  }
  out.append(visible_text);
  if (end_flag) {
    if (!visible_text.empty()) out.push_back(' ');
    out.append(kEndMarker);
  }
  return out;
}

DialogueTurn make_tutor_turn(const ParsedTutorOutput& parsed, int turn_index) {
  DialogueTurn t;
  t.speaker = Speaker::Tutor;
  t.think_text = parsed.think_text;
  t.visible_text = parsed.visible_text;
  t.end_flag = parsed.end_flag;
  t.turn_index = turn_index;
  t.malformed_think = parsed.malformed_think;
  t.extra_think_spans = parsed.extra_think_spans;
  return t;
}

DialogueTurn make_student_turn(std::string visible_text, int turn_index) {
  DialogueTurn t;
  t.speaker = Speaker::Student;
  t.visible_text = std::move(visible_text);
  t.turn_index = turn_index;
  return t;
}

std::string render_transcript(const Dialogue& d, TranscriptView view,
                              std::optional<int> upto_turn) {
  std::string out;
  for (const auto& t : d.turns) {
    if (upto_turn && t.turn_index > *upto_turn) break;
    if (!out.empty()) out.push_back('\n');
    if (t.speaker == Speaker::Tutor) {
      if (view == TranscriptView::WithThinking && !t.think_text.empty()) {
        out.append("[Teacher thinking]\n").append(t.think_text).append("\n[/Teacher thinking]\n");
      }
      out.append("Teacher: ").append(t.visible_text);
    } else {
      out.append("Student: ").append(t.visible_text);
    }
  }
  return out;
}

void validate_dialogue(const Dialogue& d, std::optional<int> max_turns) {
  auto fail = [&](const std::string& why) {
    throw InvalidDialogue("dialogue " + d.problem_id + "#" + std::to_string(d.seed) + ": " + why);
  };
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const auto& t = d.turns[i];
    Speaker expected = (i % 2 == 0) ? Speaker::Tutor : Speaker::Student;
    if (t.speaker != expected) fail("turn " + std::to_string(i) + " breaks alternation");
    if (i > 0 && t.turn_index <= d.turns[i - 1].turn_index) {
      fail("turn indices not strictly increasing at " + std::to_string(i));
    }
    if (t.speaker == Speaker::Student && (!t.think_text.empty() || t.end_flag)) {
      fail("student turn " + std::to_string(i) + " carries thinking or end flag");
    }
  }
  if (max_turns && d.tutor_turn_count() > *max_turns) fail("exceeds max_turns");
  if (!d.raw.empty() && d.raw.size() != d.turns.size()) fail("raw/turn count mismatch");
  if (d.termination == Termination::EndMarker) {
    auto last_tutor = std::find_if(d.turns.rbegin(), d.turns.rend(), [](const DialogueTurn& t) {
      return t.speaker == Speaker::Tutor;
    });
    if (last_tutor == d.turns.rend() || !last_tutor->end_flag) {
      fail("termination=EndMarker but final tutor turn has no end flag");
    }
  }
}

std::string_view to_string(Speaker s) { return s == Speaker::Tutor ? "tutor" : "student"; }

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::EndMarker: return "end_marker";
    case Termination::MaxTurns: return "max_turns";
    case Termination::Error: return "error";
  }
  return "error";
}

std::string_view to_string(PromptStyle s) {
  return s == PromptStyle::Pedagogical ? "pedagogical" : "normal";
}

Speaker speaker_from_string(std::string_view s) {
  if (s == "tutor") return Speaker::Tutor;
  if (s == "student") return Speaker::Student;
  throw ParseError("unknown speaker '" + std::string(s) + "'");
}

Termination termination_from_string(std::string_view s) {
  if (s == "end_marker") return Termination::EndMarker;
  if (s == "max_turns") return Termination::MaxTurns;
  if (s == "error") return Termination::Error;
  throw ParseError("unknown termination '" + std::string(s) + "'");
}

}  // namespace pedtutor
