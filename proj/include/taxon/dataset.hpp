// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "taxon/embeddings.hpp"
#include "taxon/taxonomy.hpp"

namespace taxon {

enum class QuestionMode { kMultipleChoice, kOpenSet };

std::string_view to_string(QuestionMode mode);
QuestionMode question_mode_from_string(std::string_view name);

struct Option {
  char letter = 'A';
  std::string label;

  bool operator==(const Option&) const = default;
};

// One query about one image at one taxonomic level. `leaf` is the image's
// ground-truth leaf; it is carried for scoring and export only and is never
// rendered into evaluation prompts.
struct Question {
  std::string id;
  std::string image_ref;
  std::string leaf;
  std::size_t level = 0;
  std::string level_name;
  QuestionMode mode = QuestionMode::kMultipleChoice;
  std::vector<Option> options;
  std::string answer;
  std::optional<char> answer_letter;
  std::vector<double> distractor_scores;

  bool operator==(const Question&) const = default;
};

void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);

std::vector<Question> read_questions(std::istream& in);
void write_questions(std::ostream& out, std::span<const Question> questions);

struct ImageRecord {
  std::string image_ref;
  std::string leaf;
};

// Which vector the distractor search compares label embeddings against.
enum class DistractorSource {
  kImageToLabel,  // image embedding vs. label text embeddings (default)
  kLabelToLabel,  // answer label embedding vs. label text embeddings
};

inline constexpr std::size_t kOptionCount = 4;

std::string question_id(std::string_view image_ref, std::size_t level);

/**
 * Four-option question at `level`: the correct ancestor plus the three
 * same-level labels most cosine-similar to the query. Letters A-D are
 * assigned by a shuffle seeded from (seed, question id), so a question is
 * reproducible independently of build order.
 */
Question build_question(const Taxonomy& taxonomy, const ImageRecord& image, std::span<const double> image_embedding,
                        std::size_t level, const EmbeddingTable& label_embeddings, std::uint64_t seed,
                        DistractorSource source = DistractorSource::kImageToLabel);

Question build_open_question(const Taxonomy& taxonomy, const ImageRecord& image, std::size_t level);

struct SpeciesSplit {
  std::vector<std::string> sft;
  std::vector<std::string> rl;
};

// Disjoint halves; the SFT half takes the extra species when the count is odd.
SpeciesSplit split_by_species(std::vector<std::string> leaves, std::uint64_t seed);

enum class SftMode { kDefault, kHierarchical };

std::string_view to_string(SftMode mode);
SftMode sft_mode_from_string(std::string_view name);

struct SftRecord {
  std::string image;
  std::string prompt;
  std::string target;

  bool operator==(const SftRecord&) const = default;
};

// `prompt_template` is rendered with {LEVEL}, {QUESTION}, {OPTIONS}.
std::vector<SftRecord> export_sft_dataset(const Taxonomy& taxonomy, std::span<const Question> questions,
                                          std::string_view prompt_template, SftMode mode);

void write_sft_jsonl(std::ostream& out, std::span<const SftRecord> records);

}  // namespace taxon
