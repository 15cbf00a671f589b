// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/grading.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <regex>

#include "pedtutor/error.hpp"
#include "pedtutor/parallel.hpp"

namespace pedtutor {

namespace {

constexpr long double kRelTol = 1e-6L;

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

// Content of the balanced {...} starting at `open` (which must be '{').
std::optional<std::string> braced(std::string_view s, std::size_t open) {
  if (open >= s.size() || s[open] != '{') return std::nullopt;
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    else if (s[i] == '}' && --depth == 0) return std::string(s.substr(open + 1, i - open - 1));
  }
  return std::nullopt;
}

std::optional<std::string> last_boxed(std::string_view s) {
  for (std::string_view tag : {"\\boxed{", "\\fbox{"}) {
    auto pos = s.rfind(tag);
    if (pos != std::string_view::npos) return braced(s, pos + tag.size() - 1);
  }
  return std::nullopt;
}

bool strip_wrapper(std::string& s, std::string_view open, std::string_view close) {
  if (s.size() >= open.size() + close.size() && s.compare(0, open.size(), open) == 0 &&
      s.compare(s.size() - close.size(), close.size(), close) == 0) {
    s = trim(std::string_view(s).substr(open.size(), s.size() - open.size() - close.size()));
    return true;
  }
  return false;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

std::optional<long double> parse_plain_number(std::string_view s) {
  static const std::regex kNumber(R"(^[+-]?(\d{1,3}(,\d{3})+|\d+)(\.\d*)?$|^[+-]?\.\d+$)");
  std::string str(s);
  if (!std::regex_match(str, kNumber)) return std::nullopt;
  str.erase(std::remove(str.begin(), str.end(), ','), str.end());
  try {
    return std::stold(str);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::string normalize_answer(std::string_view input) {
  std::string s = trim(input);
  for (bool changed = true; changed;) {
    changed = false;
    if (auto boxed = last_boxed(s)) {
      s = trim(*boxed);
      changed = true;
    }
    for (std::string_view prefix : {"the final answer is", "the answer is", "final answer:",
                                    "answer:", "final answer"}) {
      if (starts_with_ci(s, prefix)) {
        s = trim(std::string_view(s).substr(prefix.size()));
        changed = true;
        break;
      }
    }
    changed = strip_wrapper(s, "$$", "$$") || changed;
    changed = strip_wrapper(s, "$", "$") || changed;
    changed = strip_wrapper(s, "\\(", "\\)") || changed;
    changed = strip_wrapper(s, "\\[", "\\]") || changed;
    while (!s.empty() && std::string_view(".,;:!").find(s.back()) != std::string_view::npos) {
      s.pop_back();
      s = trim(s);
      changed = true;
    }
  }
  // "x = 5" -> "5"
  static const std::regex kAssign(R"(^[A-Za-z]\s*=\s*(.+)$)");
  std::smatch m;
  if (std::regex_match(s, m, kAssign)) s = trim(m[1].str());
  return to_lower(collapse_spaces(s));
}

std::optional<long double> parse_numeric_answer(std::string_view input) {
  std::string s;
  for (char c : input) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  }
  if (s.size() >= 2 && s.compare(s.size() - 2, 2, "\\%") == 0) s.resize(s.size() - 2);
  else if (!s.empty() && s.back() == '%') s.pop_back();
  if (s.empty()) return std::nullopt;

  long double sign = 1.0L;
  std::string_view body(s);
  if (body.front() == '-' || body.front() == '+') {
    if (body.front() == '-') sign = -1.0L;
    body.remove_prefix(1);
  }
  for (std::string_view tag : {"\\frac{", "\\dfrac{", "\\tfrac{"}) {
    if (body.substr(0, tag.size()) != tag) continue;
    auto num = braced(body, tag.size() - 1);
    if (!num) return std::nullopt;
    auto rest = body.substr(tag.size() + num->size() + 1);
    auto den = braced(rest, 0);
    if (!den || den->size() + 2 != rest.size()) return std::nullopt;
    auto a = parse_numeric_answer(*num);
    auto b = parse_numeric_answer(*den);
    if (!a || !b || *b == 0.0L) return std::nullopt;
    return sign * *a / *b;
  }
  if (auto slash = body.find('/'); slash != std::string_view::npos) {
    auto a = parse_plain_number(body.substr(0, slash));
    auto b = parse_plain_number(body.substr(slash + 1));
    if (!a || !b || *b == 0.0L) return std::nullopt;
    return sign * *a / *b;
  }
  auto v = parse_plain_number(body);
  if (!v) return std::nullopt;
  return sign * *v;
}

bool answers_equivalent(std::string_view candidate, std::string_view reference) {
  auto a = normalize_answer(candidate);
  auto b = normalize_answer(reference);
  auto x = parse_numeric_answer(a);
  auto y = parse_numeric_answer(b);
  if (x && y) {
    auto scale = std::max(std::fabs(*x), std::fabs(*y));
    return std::fabs(*x - *y) <= kRelTol * scale;
  }
  return a == b;
}

std::string extract_final_answer(std::string_view completion) {
  std::optional<std::string> answer_line;
  std::string last_nonempty;
  std::size_t pos = 0;
  while (pos <= completion.size()) {
    auto nl = completion.find('\n', pos);
    auto line = completion.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                   : nl - pos);
    pos = nl == std::string_view::npos ? completion.size() + 1 : nl + 1;
    auto t = trim(line);
    if (t.empty()) continue;
    last_nonempty = t;
    std::string_view v(t);
    while (!v.empty() && (v.front() == '*' || v.front() == '#' || v.front() == ' ')) {
      v.remove_prefix(1);
    }
    if (starts_with_ci(v, "answer:") || starts_with_ci(v, "answer**:") ||
        starts_with_ci(v, "final answer:")) {
      auto colon = v.find(':');
      auto rest = std::string(v.substr(colon + 1));
      while (!rest.empty() && rest.front() == '*') rest.erase(rest.begin());
      answer_line = trim(rest);
    }
  }
  if (answer_line) return *answer_line;
  if (auto boxed = last_boxed(completion)) return trim(*boxed);
  return last_nonempty;
}

double solve_rate(const Problem& problem, const Dialogue* prior, const ChatClient& student,
                  const PromptLibrary& lib, int K, std::int64_t seed, int parallelism) {
  if (K < 1) throw PreconditionError("K must be >= 1");
  const auto msgs = attempt_messages(lib, problem, prior);
  std::atomic<int> successes{0};
  parallel_for(static_cast<std::size_t>(K), parallelism, [&](std::size_t k) {
    auto reply = student.chat(msgs, seed + static_cast<std::int64_t>(k));
    if (answers_equivalent(extract_final_answer(reply.content), problem.reference_answer)) {
      ++successes;
    }
  });
  return static_cast<double>(successes.load()) / static_cast<double>(K);
}

}  // namespace pedtutor
