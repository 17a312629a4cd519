// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "taxon/dataset.hpp"

namespace taxon {

inline constexpr std::string_view kUnknownLabel = "UNKNOWN";

/**
 * Result of parsing `<think>...</think><answer>...</answer>`.
 *
 * well_formed holds only for optional whitespace, exactly one think block,
 * optional whitespace, exactly one answer block, optional whitespace, with no
 * other occurrence of the four tags anywhere. For malformed input `think` and
 * `answer` still carry the first complete block of each kind when present.
 */
struct ParsedResponse {
  std::string think;
  std::string answer;
  bool well_formed = false;
  std::string raw;
};

ParsedResponse parse_tagged(std::string_view raw);

std::string serialize_tagged(std::string_view think, std::string_view answer);

// Rule priority: bare letter, then letter followed by '.' or ')', then
// case-insensitive whitespace-normalized equality with an option label.
// Never returns a letter absent from `options`.
std::optional<char> extract_choice(std::string_view answer_text, std::span<const Option> options);

// Trimmed, whitespace-collapsed, trailing punctuation removed; case preserved.
std::string extract_name(std::string_view answer_text);

// Case-insensitive form of extract_name used for comparisons.
std::string name_match_key(std::string_view text);

// True when both sides normalize to the same non-empty key.
bool names_match(std::string_view predicted, std::string_view truth);

}  // namespace taxon
