// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace taxon::text {

bool is_space(char c);

std::string_view trim(std::string_view s);

// Trim, then collapse internal whitespace runs to a single space.
std::string collapse_whitespace(std::string_view s);

std::string ascii_lower(std::string_view s);

// Number of whitespace-separated tokens.
std::size_t count_whitespace_tokens(std::string_view s);

// One CSV record. Supports RFC 4180 double-quoted fields; no embedded newlines.
std::vector<std::string> split_csv_row(std::string_view line);

std::string join_csv_row(const std::vector<std::string>& fields);

std::vector<std::string> split_lines(std::string_view s);

}  // namespace taxon::text
