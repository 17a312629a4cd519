// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/response.hpp"

#include <array>

#include "taxon/text.hpp"

namespace taxon {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

std::optional<std::string> first_block(std::string_view raw, std::string_view open, std::string_view close) {
  const auto b = raw.find(open);
  if (b == std::string_view::npos) return std::nullopt;
  const auto e = raw.find(close, b + open.size());
  if (e == std::string_view::npos) return std::nullopt;
  return std::string(raw.substr(b + open.size(), e - b - open.size()));
}

bool only_space(std::string_view s) { return text::trim(s).empty(); }

char upper(char c) { return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c; }

bool is_punct_tail(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

}  // namespace

ParsedResponse parse_tagged(std::string_view raw) {
  ParsedResponse r;
  r.raw = std::string(raw);
  if (auto t = first_block(raw, kThinkOpen, kThinkClose)) r.think = std::move(*t);
  if (auto a = first_block(raw, kAnswerOpen, kAnswerClose)) r.answer = std::move(*a);

  constexpr std::array tags{kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose};
  for (auto tag : tags) {
    if (count_occurrences(raw, tag) != 1) return r;
  }
  const auto t_open = raw.find(kThinkOpen);
  const auto t_close = raw.find(kThinkClose);
  const auto a_open = raw.find(kAnswerOpen);
  const auto a_close = raw.find(kAnswerClose);
  if (!(t_open < t_close && t_close < a_open && a_open < a_close)) return r;
  const std::size_t think_end = t_close + kThinkClose.size();
  const std::size_t answer_end = a_close + kAnswerClose.size();
  r.well_formed = only_space(raw.substr(0, t_open)) && only_space(raw.substr(think_end, a_open - think_end)) &&
                  only_space(raw.substr(answer_end));
  return r;
}

std::string serialize_tagged(std::string_view think, std::string_view answer) {
  std::string out;
  out.reserve(think.size() + answer.size() + 34);
  out += kThinkOpen;
  out += think;
  out += kThinkClose;
  out += kAnswerOpen;
  out += answer;
  out += kAnswerClose;
  return out;
}

std::optional<char> extract_choice(std::string_view answer_text, std::span<const Option> options) {
  const std::string_view t = text::trim(answer_text);
  auto option_with = [&](char letter) -> std::optional<char> {
    for (const auto& o : options) {
      if (upper(o.letter) == upper(letter)) return o.letter;
    }
    return std::nullopt;
  };
  if (t.size() == 1) {
    if (auto l = option_with(t[0])) return l;
  }
  if (t.size() >= 2 && (t[1] == '.' || t[1] == ')')) {
    if (auto l = option_with(t[0])) return l;
  }
  const std::string key = text::ascii_lower(text::collapse_whitespace(t));
  if (key.empty()) return std::nullopt;
  for (const auto& o : options) {
    if (text::ascii_lower(text::collapse_whitespace(o.label)) == key) return o.letter;
  }
  return std::nullopt;
}

std::string extract_name(std::string_view answer_text) {
  std::string s = text::collapse_whitespace(answer_text);
  while (!s.empty() && (is_punct_tail(s.back()) || text::is_space(s.back()))) s.pop_back();
  return s;
}

std::string name_match_key(std::string_view text) { return text::ascii_lower(extract_name(text)); }

bool names_match(std::string_view predicted, std::string_view truth) {
  const std::string p = name_match_key(predicted);
  return !p.empty() && p == name_match_key(truth);
}

}  // namespace taxon
