// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include "taxon/dataset.hpp"

namespace taxon {

/**
 * Prompt templates with named slots: {REASONING}, {LEVELS}, {LEVEL},
 * {QUESTION}, {OPTIONS}, {LEAF}.
 *
 * A prompt directory overrides any subset of the defaults; file names are
 * the field names with a .txt suffix (stage1.txt, stage2_no_leaf.txt, ...).
 */
struct PromptSet {
  static constexpr std::string_view kDefaultVersion = "prompts-v1";

  std::string version{kDefaultVersion};
  std::string system;
  std::string reasoning;
  std::string no_reasoning;
  std::string stage1;
  std::string stage2;
  std::string stage2_no_leaf;
  std::string open_set;
  std::string listing;
  std::string listing_leaf;
  std::string sft;

  static PromptSet defaults();
  static PromptSet load_dir(const std::filesystem::path& dir);
};

// Replaces every {NAME} whose NAME is a key of `slots`. Substituted text is
// not rescanned; unknown slots are left verbatim.
std::string render(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& slots);

std::string format_options(std::span<const Option> options);
std::string question_text(std::string_view level_name);
std::string level_listing(const Taxonomy& taxonomy);

}  // namespace taxon
