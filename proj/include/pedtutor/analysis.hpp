// Copyright 2026 The pedtutor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pedtutor/core.hpp"
#include "pedtutor/gateway.hpp"
#include "pedtutor/prompts.hpp"
#include "pedtutor/stats.hpp"

namespace pedtutor {

/// Splits on '.', '!' or '?' followed by whitespace or end of text, never
/// inside $...$, $$...$$, \(...\) or \[...\]. Sentences are trimmed.
std::vector<std::string> split_sentences(std::string_view text);

/// Whitespace-separated tokens.
std::vector<std::string_view> tokenize_words(std::string_view text);

/// Token rule: digit, operator/relation (+ * / = ^ < > and unicode
/// relations), '$' or '\', a bracket pair, or a leading '-'. Bare letters
/// are not mathematical.
bool is_math_token(std::string_view token);
/// Fraction of tokens that are mathematical; 0 for empty text.
double math_content_ratio(std::string_view text);

/// Distinct case-folded tokens with surrounding punctuation stripped.
std::size_t unique_word_count(std::string_view text);

struct WordStats {
  std::string condition_id;
  std::size_t responses = 0;
  double visible_words = 0.0;
  double think_words = 0.0;
  // Mean of (visible + think) per response.
  double total_words = 0.0;
  // Mean distinct words per response over visible + think.
  double unique_words = 0.0;
  // Pooled token ratios.
  double visible_math_ratio = 0.0;
  double think_math_ratio = 0.0;
};

/// Averages over tutor responses. An empty input yields zeros and a warning.
WordStats word_stats(const std::vector<Dialogue>& dialogues, const std::string& condition_id);

enum class Phase { Explore, General, Verify };
inline constexpr std::array<Phase, 3> kPhases = {Phase::Explore, Phase::General,
                                                 Phase::Verify};
std::string_view to_string(Phase p);
std::optional<Phase> parse_phase_reply(std::string_view raw);

struct PhaseCounts {
  std::array<std::size_t, 3> counts{};
  std::size_t unlabeled = 0;

  std::size_t labeled() const { return counts[0] + counts[1] + counts[2]; }
  /// Proportions per phase; all zero when nothing was labeled.
  std::array<double, 3> distribution() const;
  PhaseCounts& operator+=(const PhaseCounts& o);
};

struct LabelerOptions {
  // Labeler calls per sentence before it is marked unlabeled.
  int max_label_attempts = 2;
  int parallelism = 1;
};

/// Labels each sentence of a thinking trace with a Schoenfeld phase.
/// Throws PreconditionError when the text has no sentences.
PhaseCounts classify_schoenfeld(std::string_view think_text, const ChatClient& labeler,
                                const PromptLibrary& lib, const LabelerOptions& opts = {});

struct CodebookEntry {
  std::string major_category;
  std::string sub_category;
  std::string code_name;

  std::string path() const;
};

class Codebook {
 public:
  Codebook() = default;
  explicit Codebook(std::vector<CodebookEntry> entries);

  static Codebook load(const std::filesystem::path& path);
  static Codebook load_default();

  const std::vector<CodebookEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> major_categories() const;

  /// Resolves a labeler reply: full path, "sub > code", or a code name
  /// that is unique in the codebook (case-insensitive).
  std::optional<std::size_t> resolve(std::string_view reply) const;

  /// Bulleted list of all code paths for the labeling prompt.
  std::string prompt_listing() const;

 private:
  std::vector<CodebookEntry> entries_;
};

std::filesystem::path default_codebook_path();

inline constexpr std::string_view kUnlabeled = "Unlabeled";

struct SentenceRef {
  std::string condition_id;
  std::string dialogue_ref;
  int turn_index = 0;
  int sentence_index = 0;
  std::string text;
};

struct CodedSentence {
  std::string condition_id;
  std::string dialogue_ref;
  int turn_index = 0;
  int sentence_index = 0;
  std::string sentence_text;
  // Code path ("major > sub > code") or "Unlabeled".
  std::string code_name;
  std::string major_category;
  std::string labeler_raw;

  bool labeled() const { return code_name != kUnlabeled; }
};

nlohmann::json coded_to_json(const CodedSentence& c);

std::string dialogue_ref(const Dialogue& d);

/// Sentences of the visible text of every tutor turn.
std::vector<SentenceRef> tutor_sentences(const std::vector<Dialogue>& dialogues);

/// Returns one record per input sentence, in input order.
std::vector<CodedSentence> label_codebook(const std::vector<SentenceRef>& sentences,
                                          const Codebook& codebook,
                                          const ChatClient& labeler,
                                          const PromptLibrary& lib,
                                          const LabelerOptions& opts = {});

enum class GroupBy { MajorCategory, Code };

struct FrequencyTable {
  // condition -> label -> count, labeled sentences only.
  std::map<std::string, std::map<std::string, std::size_t>> counts;

  std::size_t total(const std::string& condition) const;
  double proportion(const std::string& condition, const std::string& label) const;
  std::map<std::string, double> proportions(const std::string& condition) const;
  std::vector<std::string> labels() const;
};

/// Codes are keyed by bare code name unless the name is ambiguous in the
/// codebook, in which case "sub > code" is used.
FrequencyTable code_frequency_table(const std::vector<CodedSentence>& coded, GroupBy group_by,
                                    const Codebook* codebook = nullptr);

/// Conditions x labels contingency table (rows ordered by condition name).
CountTable contingency(const FrequencyTable& t, const std::vector<std::string>& conditions,
                       const std::vector<std::string>& labels);
/// 2x2: {label, not label} for two conditions.
CountTable presence_table(const FrequencyTable& t, const std::string& cond_a,
                          const std::string& cond_b, const std::string& label);

struct AnalysisResult {
  std::vector<WordStats> word_stats;
  std::map<std::string, PhaseCounts> phases;
  FrequencyTable major;
  FrequencyTable codes;
  struct NamedTest {
    std::string name;
    StatTestResult result;
  };
  std::vector<NamedTest> tests;
};

/// Markdown tables: word statistics, math ratios, phase distribution, major
/// category distribution, top codes and chi-square tests.
std::string render_analysis(const AnalysisResult& a, std::size_t top_codes = 10);

}  // namespace pedtutor
