// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/dataset.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "taxon/errors.hpp"
#include "taxon/prompts.hpp"
#include "taxon/rng.hpp"
#include "taxon/text.hpp"

namespace taxon {

std::string_view to_string(QuestionMode mode) {
  return mode == QuestionMode::kMultipleChoice ? "multiple_choice" : "open_set";
}

QuestionMode question_mode_from_string(std::string_view name) {
  if (name == "multiple_choice") return QuestionMode::kMultipleChoice;
  if (name == "open_set") return QuestionMode::kOpenSet;
  throw Error(ErrorCode::kParse, "unknown question mode '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const Question& q) {
  nlohmann::json options = nlohmann::json::array();
  for (const auto& o : q.options) options.push_back({{"letter", std::string(1, o.letter)}, {"label", o.label}});
  j = nlohmann::json{
      {"id", q.id},
      {"image", q.image_ref},
      {"leaf", q.leaf},
      {"level", q.level},
      {"level_name", q.level_name},
      {"mode", to_string(q.mode)},
      {"options", std::move(options)},
      {"answer", q.answer},
      {"answer_letter", q.answer_letter ? nlohmann::json(std::string(1, *q.answer_letter)) : nlohmann::json(nullptr)},
      {"distractor_scores", q.distractor_scores},
  };
}

namespace {

char letter_from_json(const nlohmann::json& j) {
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw Error(ErrorCode::kParse, "option letter must be one character, got '" + s + "'");
  return s[0];
}

}  // namespace

void from_json(const nlohmann::json& j, Question& q) {
  q.id = j.at("id").get<std::string>();
  q.image_ref = j.at("image").get<std::string>();
  q.leaf = j.at("leaf").get<std::string>();
  q.level = j.at("level").get<std::size_t>();
  q.level_name = j.value("level_name", std::string{});
  q.mode = question_mode_from_string(j.at("mode").get<std::string>());
  q.options.clear();
  for (const auto& o : j.at("options")) q.options.push_back(Option{letter_from_json(o.at("letter")), o.at("label").get<std::string>()});
  q.answer = j.at("answer").get<std::string>();
  q.answer_letter.reset();
  if (j.contains("answer_letter") && !j.at("answer_letter").is_null()) q.answer_letter = letter_from_json(j.at("answer_letter"));
  q.distractor_scores = j.value("distractor_scores", std::vector<double>{});
}

std::vector<Question> read_questions(std::istream& in) {
  std::vector<Question> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<Question>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_questions(std::ostream& out, std::span<const Question> questions) {
  for (const auto& q : questions) out << nlohmann::json(q).dump() << '\n';
}

std::string question_id(std::string_view image_ref, std::size_t level) {
  return std::string(image_ref) + "#" + std::to_string(level);
}

namespace {

std::string answer_at(const Taxonomy& taxonomy, const ImageRecord& image, std::size_t level) {
  if (level >= taxonomy.level_count()) {
    throw Error(ErrorCode::kLevelOutOfRange, "level " + std::to_string(level) + " for image " + image.image_ref);
  }
  const auto path = taxonomy.ancestor_path(image.leaf);
  if (level >= path.size()) {
    throw Error(ErrorCode::kLevelOutOfRange, "leaf '" + image.leaf + "' has depth " + std::to_string(path.size()) +
                                                 ", asked for level " + std::to_string(level));
  }
  return path[level];
}

}  // namespace

Question build_question(const Taxonomy& taxonomy, const ImageRecord& image, std::span<const double> image_embedding,
                        std::size_t level, const EmbeddingTable& label_embeddings, std::uint64_t seed,
                        DistractorSource source) {
  Question q;
  q.id = question_id(image.image_ref, level);
  q.image_ref = image.image_ref;
  q.leaf = image.leaf;
  q.level = level;
  q.answer = answer_at(taxonomy, image, level);
  q.level_name = taxonomy.level_names()[level];
  q.mode = QuestionMode::kMultipleChoice;

  std::vector<std::string> candidates;
  for (auto& label : taxonomy.level_label_set(level)) {
    if (!label_embeddings.contains(label)) {
      throw Error(ErrorCode::kMissingEmbedding, "no embedding for label '" + label + "' at level " + q.level_name);
    }
    if (label != q.answer) candidates.push_back(std::move(label));
  }
  constexpr std::size_t kDistractors = kOptionCount - 1;
  if (candidates.size() < kDistractors) {
    throw Error(ErrorCode::kInsufficientCandidates, "level " + q.level_name + " has " +
                                                        std::to_string(candidates.size() + 1) +
                                                        " labels, a question needs " + std::to_string(kOptionCount));
  }

  const auto query = source == DistractorSource::kImageToLabel ? image_embedding : label_embeddings.get(q.answer);
  const auto distractors = cosine_topk(label_embeddings, query, candidates, kDistractors);

  std::vector<std::string> labels{q.answer};
  for (const auto& d : distractors) {
    labels.push_back(d.key);
    q.distractor_scores.push_back(d.similarity);
  }
  Rng rng(derive_seed(derive_seed(seed, "shuffle"), q.id));
  rng.shuffle(std::span<std::string>(labels));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const char letter = static_cast<char>('A' + i);
    if (labels[i] == q.answer) q.answer_letter = letter;
    q.options.push_back(Option{letter, std::move(labels[i])});
  }
  return q;
}

Question build_open_question(const Taxonomy& taxonomy, const ImageRecord& image, std::size_t level) {
  Question q;
  q.id = question_id(image.image_ref, level);
  q.image_ref = image.image_ref;
  q.leaf = image.leaf;
  q.level = level;
  q.answer = answer_at(taxonomy, image, level);
  q.level_name = taxonomy.level_names()[level];
  q.mode = QuestionMode::kOpenSet;
  return q;
}

SpeciesSplit split_by_species(std::vector<std::string> leaves, std::uint64_t seed) {
  std::set<std::string_view> seen;
  for (const auto& leaf : leaves) {
    if (!seen.insert(leaf).second) throw Error(ErrorCode::kDuplicateLeaf, "duplicate species '" + leaf + "'");
  }
  // Shuffle from a canonical order so the split depends on the set, not its input order.
  std::sort(leaves.begin(), leaves.end());
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(std::span<std::string>(leaves));
  const auto half = static_cast<std::ptrdiff_t>((leaves.size() + 1) / 2);
  SpeciesSplit split;
  split.sft.assign(leaves.begin(), leaves.begin() + half);
  split.rl.assign(leaves.begin() + half, leaves.end());
  std::sort(split.sft.begin(), split.sft.end());
  std::sort(split.rl.begin(), split.rl.end());
  return split;
}

std::string_view to_string(SftMode mode) { return mode == SftMode::kDefault ? "default" : "hierarchical"; }

SftMode sft_mode_from_string(std::string_view name) {
  if (name == "default") return SftMode::kDefault;
  if (name == "hierarchical") return SftMode::kHierarchical;
  throw Error(ErrorCode::kConfig, "unknown SFT mode '" + std::string(name) + "'");
}

std::vector<SftRecord> export_sft_dataset(const Taxonomy& taxonomy, std::span<const Question> questions,
                                          std::string_view prompt_template, SftMode mode) {
  std::vector<SftRecord> out;
  out.reserve(questions.size());
  for (const auto& q : questions) {
    std::vector<std::string> path;
    try {
      path = taxonomy.ancestor_path(q.leaf);
    } catch (const Error& e) {
      throw Error(ErrorCode::kUnresolvablePath, "question " + q.id + ": " + e.what());
    }
    if (q.level >= path.size() || path[q.level] != q.answer) {
      throw Error(ErrorCode::kUnresolvablePath, "question " + q.id + ": answer '" + q.answer +
                                                    "' is not on the path of '" + q.leaf + "'");
    }
    const std::string level_name = q.level_name.empty() ? taxonomy.level_names()[q.level] : q.level_name;
    SftRecord r;
    r.image = q.image_ref;
    r.prompt = render(prompt_template, {{"LEVEL", level_name},
                                        {"QUESTION", question_text(level_name)},
                                        {"OPTIONS", format_options(q.options)}});
    const std::string answer = q.answer_letter ? std::string(1, *q.answer_letter) : q.answer;
    if (mode == SftMode::kHierarchical) {
      for (std::size_t j = 0; j < path.size(); ++j) {
        r.target += taxonomy.level_names()[j] + ": " + path[j] + "\n";
      }
      r.target += "Answer: " + answer;
    } else {
      r.target = answer;
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_sft_jsonl(std::ostream& out, std::span<const SftRecord> records) {
  for (const auto& r : records) {
    out << nlohmann::json{{"image", r.image}, {"prompt", r.prompt}, {"target", r.target}}.dump() << '\n';
  }
}

}  // namespace taxon
