// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedtutor/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "pedtutor/error.hpp"
#include "pedtutor/jsonl.hpp"
#include "pedtutor/kernels.hpp"
#include "pedtutor/parallel.hpp"
#include "pedtutor/reward.hpp"

namespace pedtutor {

using nlohmann::json;

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

enum class MathMode { None, Dollar, DoubleDollar, Paren, Bracket };

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  MathMode mode = MathMode::None;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    auto s = trim(text.substr(start, end - start));
    if (!s.empty()) out.push_back(std::move(s));
    start = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const char next = i + 1 < text.size() ? text[i + 1] : '\0';
    if (c == '\\' && (next == '(' || next == '[' || next == ')' || next == ']')) {
      if (mode == MathMode::None && next == '(') mode = MathMode::Paren;
      else if (mode == MathMode::None && next == '[') mode = MathMode::Bracket;
      else if (mode == MathMode::Paren && next == ')') mode = MathMode::None;
      else if (mode == MathMode::Bracket && next == ']') mode = MathMode::None;
      ++i;
      continue;
    }
    if (c == '\\' && next == '$') {
      ++i;
      continue;
    }
    if (c == '$') {
      const bool dbl = next == '$';
      if (mode == MathMode::None) mode = dbl ? MathMode::DoubleDollar : MathMode::Dollar;
      else if (mode == MathMode::DoubleDollar && dbl) mode = MathMode::None;
      else if (mode == MathMode::Dollar) mode = MathMode::None;
      if (dbl) ++i;
      continue;
    }
    if (mode != MathMode::None || !is_terminal(c)) continue;
    std::size_t j = i + 1;
    while (j < text.size() && (is_terminal(text[j]) || text[j] == '"' || text[j] == '\'' ||
                               text[j] == ')')) {
      ++j;
    }
    if (j == text.size() || is_space(text[j])) {
      emit(j);
      i = j - 1;
    }
  }
  if (start < text.size()) emit(text.size());
  return out;
}

std::vector<std::string_view> tokenize_words(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_math_token(std::string_view token) {
  if (token.empty()) return false;
  if (token.front() == '-') return true;
  for (char c : token) {
    if (std::isdigit(static_cast<unsigned char>(c))) return true;
    switch (c) {
      case '+': case '*': case '/': case '=': case '^': case '<': case '>':
      case '$': case '\\':
        return true;
      default:
        break;
    }
  }
  for (std::string_view u : {"−", "×", "÷", "≤", "≥", "≠"}) {
    if (token.find(u) != std::string_view::npos) return true;
  }
  auto pair = [&](char open, char close) {
    auto a = token.find(open);
    return a != std::string_view::npos && token.find(close, a + 1) != std::string_view::npos;
  };
  return pair('(', ')') || pair('[', ']') || pair('{', '}');
}

double math_content_ratio(std::string_view text) {
  auto toks = tokenize_words(text);
  if (toks.empty()) return 0.0;
  std::size_t math = 0;
  for (auto t : toks) math += is_math_token(t) ? 1 : 0;
  return static_cast<double>(math) / static_cast<double>(toks.size());
}

std::size_t unique_word_count(std::string_view text) {
  std::unordered_set<std::string> seen;
  for (auto tok : tokenize_words(text)) {
    std::size_t a = 0, b = tok.size();
    while (a < b && std::ispunct(static_cast<unsigned char>(tok[a]))) ++a;
    while (b > a && std::ispunct(static_cast<unsigned char>(tok[b - 1]))) --b;
    if (a == b) continue;
    seen.insert(to_lower(tok.substr(a, b - a)));
  }
  return seen.size();
}

WordStats word_stats(const std::vector<Dialogue>& dialogues, const std::string& condition_id) {
  WordStats s;
  s.condition_id = condition_id;
  std::vector<std::string> visible, think, both;
  for (const auto& d : dialogues) {
    for (const auto& t : d.turns) {
      if (t.speaker != Speaker::Tutor) continue;
      visible.push_back(t.visible_text);
      think.push_back(t.think_text);
      both.push_back(t.think_text + " " + t.visible_text);
    }
  }
  if (visible.empty()) {
    spdlog::warn("word_stats: no tutor responses for condition {}", condition_id);
    return s;
  }
  auto vc = kernels::parallel::text_counts(visible);
  auto tc = kernels::parallel::text_counts(think);
  auto bc = kernels::parallel::text_counts(both);
  std::size_t v_tokens = 0, v_math = 0, t_tokens = 0, t_math = 0, uniq = 0;
  for (std::size_t i = 0; i < vc.size(); ++i) {
    v_tokens += vc[i].tokens;
    v_math += vc[i].math_tokens;
    t_tokens += tc[i].tokens;
    t_math += tc[i].math_tokens;
    uniq += bc[i].unique;
  }
  const auto n = static_cast<double>(vc.size());
  s.responses = vc.size();
  s.visible_words = static_cast<double>(v_tokens) / n;
  s.think_words = static_cast<double>(t_tokens) / n;
  s.total_words = static_cast<double>(v_tokens + t_tokens) / n;
  s.unique_words = static_cast<double>(uniq) / n;
  s.visible_math_ratio = v_tokens ? static_cast<double>(v_math) / static_cast<double>(v_tokens) : 0.0;
  s.think_math_ratio = t_tokens ? static_cast<double>(t_math) / static_cast<double>(t_tokens) : 0.0;
  return s;
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Explore: return "Explore";
    case Phase::General: return "General";
    case Phase::Verify: return "Verify";
  }
  return "Explore";
}

namespace {

std::string strip_label(std::string_view s) {
  auto t = trim(s);
  std::size_t a = 0, b = t.size();
  auto junk = [](char c) { return c == '"' || c == '\'' || c == '`' || c == '*' || c == '.'; };
  while (a < b && junk(t[a])) ++a;
  while (b > a && junk(t[b - 1])) --b;
  return trim(std::string_view(t).substr(a, b - a));
}

// Value of `key` (case-insensitive) in the first JSON object, else the whole reply.
std::string label_field(std::string_view raw, std::string_view key) {
  if (auto obj = extract_json_object(raw)) {
    for (auto it = obj->begin(); it != obj->end(); ++it) {
      if (to_lower(it.key()) == key && it->is_string()) return strip_label(it->get<std::string>());
    }
    return {};
  }
  return strip_label(raw);
}

std::vector<ChatMessage> label_messages(std::string system, std::string sentence) {
  return {{Role::System, std::move(system)}, {Role::User, std::move(sentence)}};
}

}  // namespace

std::optional<Phase> parse_phase_reply(std::string_view raw) {
  auto v = to_lower(label_field(raw, "phase"));
  for (auto p : kPhases) {
    if (v == to_lower(to_string(p))) return p;
  }
  return std::nullopt;
}

std::array<double, 3> PhaseCounts::distribution() const {
  std::array<double, 3> d{};
  const auto n = labeled();
  if (n == 0) return d;
  for (std::size_t i = 0; i < 3; ++i) d[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
  return d;
}

PhaseCounts& PhaseCounts::operator+=(const PhaseCounts& o) {
  for (std::size_t i = 0; i < 3; ++i) counts[i] += o.counts[i];
  unlabeled += o.unlabeled;
  return *this;
}

PhaseCounts classify_schoenfeld(std::string_view think_text, const ChatClient& labeler,
                                const PromptLibrary& lib, const LabelerOptions& opts) {
  auto sentences = split_sentences(think_text);
  if (sentences.empty()) throw PreconditionError("classify_schoenfeld: no sentences in thinking text");
  const auto& system = lib.raw(PromptRole::LabelSchoenfeld);
  std::vector<std::optional<Phase>> labels(sentences.size());
  parallel_for(sentences.size(), opts.parallelism, [&](std::size_t i) {
    auto msgs = label_messages(system, sentences[i]);
    for (int attempt = 0; attempt < opts.max_label_attempts; ++attempt) {
      auto reply = labeler.chat(msgs, attempt);
      if (auto p = parse_phase_reply(reply.content)) {
        labels[i] = p;
        return;
      }
    }
  });
  PhaseCounts c;
  for (const auto& l : labels) {
    if (l) ++c.counts[static_cast<std::size_t>(*l)];
    else ++c.unlabeled;
  }
  if (c.labeled() == 0) {
    throw MalformedLabel("no sentence received a valid phase label after " +
                         std::to_string(opts.max_label_attempts) + " attempts");
  }
  return c;
}

std::string CodebookEntry::path() const {
  return major_category + " > " + sub_category + " > " + code_name;
}

Codebook::Codebook(std::vector<CodebookEntry> entries) : entries_(std::move(entries)) {}

Codebook Codebook::load(const std::filesystem::path& path) {
  std::vector<CodebookEntry> entries;
  for (const auto& rec : read_jsonl(path)) {
    try {
      entries.push_back({rec.at("major").get<std::string>(), rec.at("sub").get<std::string>(),
                         rec.at("code").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": bad codebook record: " + e.what());
    }
  }
  if (entries.empty()) throw ParseError(path.string() + ": empty codebook");
  return Codebook(std::move(entries));
}

Codebook Codebook::load_default() { return load(default_codebook_path()); }

std::vector<std::string> Codebook::major_categories() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (std::find(out.begin(), out.end(), e.major_category) == out.end()) {
      out.push_back(e.major_category);
    }
  }
  return out;
}

namespace {

std::string normalize_path(std::string_view s) {
  std::string out;
  std::size_t start = 0;
  while (true) {
    auto p = s.find('>', start);
    auto part = s.substr(start, p == std::string_view::npos ? s.npos : p - start);
    if (!out.empty()) out += " > ";
    out += to_lower(trim(part));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

}  // namespace

std::optional<std::size_t> Codebook::resolve(std::string_view reply) const {
  const auto want = normalize_path(strip_label(reply));
  if (want.empty()) return std::nullopt;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (normalize_path(entries_[i].path()) == want) return i;
  }
  std::optional<std::size_t> hit;
  int hits = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (normalize_path(e.sub_category + " > " + e.code_name) == want) {
      hit = i;
      ++hits;
    }
  }
  if (hits == 1) return hit;
  hits = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (to_lower(entries_[i].code_name) == want) {
      hit = i;
      ++hits;
    }
  }
  if (hits == 1) return hit;
  return std::nullopt;
}

std::string Codebook::prompt_listing() const {
  std::string out;
  for (const auto& e : entries_) out += "- " + e.path() + "\n";
  if (!out.empty()) out.pop_back();
  return out;
}

std::filesystem::path default_codebook_path() {
  if (const char* env = std::getenv("PEDTUTOR_DATA_DIR"); env && *env) {
    return std::filesystem::path(env) / "codebook.jsonl";
  }
  return std::filesystem::path(PEDTUTOR_DATA_DIR) / "codebook.jsonl";
}

json coded_to_json(const CodedSentence& c) {
  return {{"condition_id", c.condition_id},     {"dialogue_ref", c.dialogue_ref},
          {"turn_index", c.turn_index},         {"sentence_index", c.sentence_index},
          {"sentence_text", c.sentence_text},   {"code_name", c.code_name},
          {"major_category", c.major_category}, {"labeler_raw", c.labeler_raw}};
}

std::string dialogue_ref(const Dialogue& d) {
  return d.problem_id + "#" + std::to_string(d.seed);
}

std::vector<SentenceRef> tutor_sentences(const std::vector<Dialogue>& dialogues) {
  std::vector<SentenceRef> out;
  for (const auto& d : dialogues) {
    const auto ref = dialogue_ref(d);
    for (const auto& t : d.turns) {
      if (t.speaker != Speaker::Tutor) continue;
      int idx = 0;
      for (auto& s : split_sentences(t.visible_text)) {
        out.push_back({d.condition_id, ref, t.turn_index, idx++, std::move(s)});
      }
    }
  }
  return out;
}

std::vector<CodedSentence> label_codebook(const std::vector<SentenceRef>& sentences,
                                          const Codebook& codebook,
                                          const ChatClient& labeler,
                                          const PromptLibrary& lib,
                                          const LabelerOptions& opts) {
  if (codebook.size() == 0) throw PreconditionError("label_codebook: codebook not loaded");
  const auto system =
      substitute(lib.raw(PromptRole::LabelCodebook), "{{ codes }}", codebook.prompt_listing());
  std::vector<CodedSentence> out(sentences.size());
  parallel_for(sentences.size(), opts.parallelism, [&](std::size_t i) {
    const auto& s = sentences[i];
    auto& c = out[i];
    c.condition_id = s.condition_id;
    c.dialogue_ref = s.dialogue_ref;
    c.turn_index = s.turn_index;
    c.sentence_index = s.sentence_index;
    c.sentence_text = s.text;
    c.code_name = std::string(kUnlabeled);
    auto msgs = label_messages(system, s.text);
    for (int attempt = 0; attempt < opts.max_label_attempts; ++attempt) {
      auto reply = labeler.chat(msgs, attempt);
      c.labeler_raw = reply.content;
      if (auto idx = codebook.resolve(label_field(reply.content, "code"))) {
        const auto& e = codebook.entries()[*idx];
        c.code_name = e.path();
        c.major_category = e.major_category;
        return;
      }
    }
  });
  return out;
}

std::size_t FrequencyTable::total(const std::string& condition) const {
  auto it = counts.find(condition);
  if (it == counts.end()) return 0;
  std::size_t n = 0;
  for (const auto& [_, c] : it->second) n += c;
  return n;
}

double FrequencyTable::proportion(const std::string& condition, const std::string& label) const {
  const auto n = total(condition);
  if (n == 0) return 0.0;
  const auto& m = counts.at(condition);
  auto it = m.find(label);
  return it == m.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(n);
}

std::map<std::string, double> FrequencyTable::proportions(const std::string& condition) const {
  std::map<std::string, double> out;
  auto it = counts.find(condition);
  if (it == counts.end()) return out;
  const auto n = static_cast<double>(total(condition));
  for (const auto& [label, c] : it->second) out[label] = static_cast<double>(c) / n;
  return out;
}

std::vector<std::string> FrequencyTable::labels() const {
  std::set<std::string> all;
  for (const auto& [_, m] : counts) {
    for (const auto& [label, _c] : m) all.insert(label);
  }
  return {all.begin(), all.end()};
}

namespace {

struct PathParts {
  std::string major, sub, code;
};

PathParts split_path(const std::string& path) {
  PathParts p;
  auto a = path.find(" > ");
  if (a == std::string::npos) {
    p.code = path;
    return p;
  }
  auto b = path.find(" > ", a + 3);
  if (b == std::string::npos) {
    p.sub = path.substr(0, a);
    p.code = path.substr(a + 3);
    return p;
  }
  p.major = path.substr(0, a);
  p.sub = path.substr(a + 3, b - a - 3);
  p.code = path.substr(b + 3);
  return p;
}

}  // namespace

FrequencyTable code_frequency_table(const std::vector<CodedSentence>& coded, GroupBy group_by,
                                    const Codebook* codebook) {
  if (coded.empty()) throw PreconditionError("code_frequency_table: no coded sentences");
  std::map<std::string, std::set<std::string>> subs_of_code;
  if (codebook) {
    for (const auto& e : codebook->entries()) subs_of_code[e.code_name].insert(e.sub_category);
  } else {
    for (const auto& c : coded) {
      if (!c.labeled()) continue;
      auto p = split_path(c.code_name);
      subs_of_code[p.code].insert(p.sub);
    }
  }
  FrequencyTable t;
  for (const auto& c : coded) {
    if (!c.labeled()) continue;
    auto p = split_path(c.code_name);
    std::string key;
    if (group_by == GroupBy::MajorCategory) {
      key = !c.major_category.empty() ? c.major_category : p.major;
    } else {
      key = subs_of_code[p.code].size() > 1 ? p.sub + " > " + p.code : p.code;
    }
    ++t.counts[c.condition_id][key];
  }
  return t;
}

CountTable contingency(const FrequencyTable& t, const std::vector<std::string>& conditions,
                       const std::vector<std::string>& labels) {
  CountTable table;
  for (const auto& cond : conditions) {
    std::vector<double> row;
    auto it = t.counts.find(cond);
    for (const auto& label : labels) {
      double v = 0.0;
      if (it != t.counts.end()) {
        auto jt = it->second.find(label);
        if (jt != it->second.end()) v = static_cast<double>(jt->second);
      }
      row.push_back(v);
    }
    table.push_back(std::move(row));
  }
  return table;
}

CountTable presence_table(const FrequencyTable& t, const std::string& cond_a,
                          const std::string& cond_b, const std::string& label) {
  CountTable table;
  for (const auto& cond : {cond_a, cond_b}) {
    double hit = 0.0;
    if (auto it = t.counts.find(cond); it != t.counts.end()) {
      if (auto jt = it->second.find(label); jt != it->second.end()) hit = static_cast<double>(jt->second);
    }
    table.push_back({hit, static_cast<double>(t.total(cond)) - hit});
  }
  return table;
}

namespace {

std::string fmt_num(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string fmt_pct(double v) { return fmt_num(100.0 * v, 1) + "%"; }

std::string fmt_p(double p) { return p < 0.001 ? "<.001" : fmt_num(p, 3); }

}  // namespace

std::string render_analysis(const AnalysisResult& a, std::size_t top_codes) {
  std::string out = "# Analysis\n\n## Word counts per response\n\n";
  out += "| Condition | Responses | Visible | Think | Total | Unique |\n|---|---:|---:|---:|---:|---:|\n";
  for (const auto& w : a.word_stats) {
    out += "| " + w.condition_id + " | " + std::to_string(w.responses) + " | " +
           fmt_num(w.visible_words, 2) + " | " + fmt_num(w.think_words, 2) + " | " +
           fmt_num(w.total_words, 2) + " | " + fmt_num(w.unique_words, 2) + " |\n";
  }
  out += "\n## Math content\n\n| Condition | Visible | Think |\n|---|---:|---:|\n";
  for (const auto& w : a.word_stats) {
    out += "| " + w.condition_id + " | " + fmt_pct(w.visible_math_ratio) + " | " +
           fmt_pct(w.think_math_ratio) + " |\n";
  }
  if (!a.phases.empty()) {
    out += "\n## Thinking phases\n\n| Condition | Explore | General | Verify | Unlabeled |\n"
           "|---|---:|---:|---:|---:|\n";
    for (const auto& [cond, pc] : a.phases) {
      auto d = pc.distribution();
      out += "| " + cond + " | " + fmt_pct(d[0]) + " | " + fmt_pct(d[1]) + " | " +
             fmt_pct(d[2]) + " | " + std::to_string(pc.unlabeled) + " |\n";
    }
  }
  if (!a.major.counts.empty()) {
    out += "\n## Major category distribution\n\n| Category |";
    std::string sep = "|---|";
    for (const auto& [cond, _] : a.major.counts) {
      out += " " + cond + " |";
      sep += "---:|";
    }
    out += "\n" + sep + "\n";
    for (const auto& label : a.major.labels()) {
      out += "| " + label + " |";
      for (const auto& [cond, _] : a.major.counts) out += " " + fmt_pct(a.major.proportion(cond, label)) + " |";
      out += "\n";
    }
  }
  for (const auto& [cond, m] : a.codes.counts) {
    std::vector<std::pair<std::string, std::size_t>> ranked(m.begin(), m.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    if (ranked.size() > top_codes) ranked.resize(top_codes);
    out += "\n## Top codes: " + cond + "\n\n| Rank | Code | Count | Share |\n|---:|---|---:|---:|\n";
    int rank = 1;
    for (const auto& [code, n] : ranked) {
      out += "| " + std::to_string(rank++) + " | " + code + " | " + std::to_string(n) + " | " +
             fmt_pct(a.codes.proportion(cond, code)) + " |\n";
    }
  }
  if (!a.tests.empty()) {
    out += "\n## Chi-square tests\n\n| Test | χ² | df | p | Effect | n |\n|---|---:|---:|---:|---|---:|\n";
    for (const auto& t : a.tests) {
      const auto& r = t.result;
      out += "| " + t.name + " | " + fmt_num(r.chi2, 2) + " | " + std::to_string(r.df) + " | " +
             fmt_p(r.p_value) + " | " + std::string(to_string(r.effect_kind)) + "=" +
             fmt_num(r.effect, 3) + " | " + std::to_string(r.n) + " |\n";
    }
  }
  return out;
}

}  // namespace pedtutor
