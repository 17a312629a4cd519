// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "taxon/backend.hpp"
#include "taxon/dataset.hpp"
#include "taxon/prompts.hpp"
#include "taxon/taxonomy.hpp"

namespace taxon {

enum class RunMode {
  kFullTwoStage,
  kNoReasoning,
  kNoFirstStage,
  kDirectListing,
  kLeafCondition,
  kOpenSet,
};

std::string_view to_string(RunMode mode);
RunMode run_mode_from_string(std::string_view name);

struct LevelOutcome {
  std::size_t level = 0;
  std::string level_name;
  std::string true_label;
  std::string predicted;  // option letter, generated name, or listed label
  bool correct = false;
  std::size_t tokens = 0;  // tokens of the call dedicated to this level, 0 for shared calls
  std::string transcript;
  bool well_formed = false;

  bool operator==(const LevelOutcome&) const = default;
};

/**
 * Outcome for one image. `shared_tokens` holds calls that serve every level
 * of the image (the stage-1 call or a listing call); `token_counts` holds all
 * calls in issue order.
 */
struct EvalRecord {
  std::string image_ref;
  std::string leaf;
  RunMode mode = RunMode::kFullTwoStage;
  std::vector<LevelOutcome> levels;
  std::string stage1_leaf;
  std::string stage1_transcript;
  bool stage1_well_formed = false;
  std::vector<std::size_t> shared_tokens;
  std::vector<std::size_t> token_counts;
  bool failed = false;
  std::string error;

  bool operator==(const EvalRecord&) const = default;
};

void to_json(nlohmann::json& j, const EvalRecord& r);
void from_json(const nlohmann::json& j, EvalRecord& r);

std::vector<EvalRecord> read_records(std::istream& in);
void write_records(std::ostream& out, std::span<const EvalRecord> records);

struct Stage1Result {
  std::string leaf;  // kUnknownLabel when the response is malformed
  std::string transcript;
  bool well_formed = false;
  std::size_t tokens = 0;
};

struct Stage2Result {
  std::string predicted;  // letter, name, or empty on no match
  bool correct = false;
  std::string transcript;
  bool well_formed = false;
  std::size_t tokens = 0;
};

struct RunOptions {
  RunMode mode = RunMode::kFullTwoStage;
  std::size_t max_inflight = 4;
  PromptSet prompts = PromptSet::defaults();
};

struct RunResult {
  std::vector<EvalRecord> records;
  std::size_t failures = 0;

  bool partial() const { return failures > 0; }
};

// Messages for each call type; exposed so prompt contents can be audited.
std::vector<Message> stage1_messages(const Taxonomy& taxonomy, const PromptSet& prompts, bool reasoning);
std::vector<Message> stage2_messages(const PromptSet& prompts, const Question& question,
                                     const std::optional<std::string>& leaf, bool reasoning);
std::vector<Message> listing_messages(const Taxonomy& taxonomy, const PromptSet& prompts,
                                      const std::optional<std::string>& leaf);

Stage1Result stage1_infer(ModelBackend& backend, const Taxonomy& taxonomy, const std::string& image_ref,
                          const PromptSet& prompts, RunMode mode = RunMode::kFullTwoStage);

// `stage1_leaf` is embedded verbatim in the conditioning slot; pass
// std::nullopt for the unconditioned ablation.
Stage2Result stage2_answer(ModelBackend& backend, const Question& question,
                           const std::optional<std::string>& stage1_leaf, const PromptSet& prompts,
                           RunMode mode = RunMode::kFullTwoStage);

// Root-first labels from a listing answer, one per non-empty line. Bullets,
// numbering and "Level:" prefixes are stripped.
std::vector<std::string> parse_listing(std::string_view answer, std::span<const std::string> level_names);

/**
 * Runs the protocol for `mode` over questions grouped by image (first
 * appearance order). Images run concurrently up to max_inflight; records
 * come back in input order. Backend failures mark the record failed and the
 * run continues.
 */
RunResult run(ModelBackend& backend, const Taxonomy& taxonomy, std::span<const Question> questions,
              const RunOptions& options);

}  // namespace taxon
