// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/prompts.hpp"

#include <fstream>
#include <sstream>

#include "taxon/errors.hpp"

namespace taxon {

PromptSet PromptSet::defaults() {
  PromptSet p;
  p.system = "You are an expert taxonomist. You classify the organism shown in an image.";
  p.reasoning =
      "Reason through the taxonomy from the most general level to the most specific one, one level at a "
      "time, inside <think> </think> tags. Then give the final answer inside <answer> </answer> tags.";
  p.no_reasoning =
      "Do not explain. Reply with an empty <think></think> block followed by the final answer inside "
      "<answer> </answer> tags.";
  p.stage1 =
      "The taxonomic levels are: {LEVELS}.\n"
      "Identify the most specific category of the organism in the image and state its name.\n"
      "{REASONING}";
  p.stage2 =
      "The organism in the image has been identified as: {LEAF}.\n"
      "Using this identification, answer the question.\nQuestion: {QUESTION}\n"
      "Options:\n{OPTIONS}\n"
      "{REASONING} The answer must be the letter of one option.";
  p.stage2_no_leaf =
      "Question: {QUESTION}\n"
      "Options:\n{OPTIONS}\n"
      "{REASONING} The answer must be the letter of one option.";
  p.open_set =
      "The organism in the image has been identified as: {LEAF}.\n"
      "Using this identification, answer the question.\nQuestion: {QUESTION}\n"
      "{REASONING} The answer must be the name of the {LEVEL} only.";
  p.listing =
      "The taxonomic levels are: {LEVELS}.\n"
      "List the classification of the organism in the image at every level, one name per line, from the "
      "most general level to the most specific one.\n"
      "{REASONING}";
  p.listing_leaf =
      "The taxonomic levels are: {LEVELS}.\n"
      "The organism in the image is {LEAF}.\n"
      "List its classification at every level, one name per line, from the most general level to the "
      "most specific one.\n"
      "{REASONING}";
  p.sft = "Question: {QUESTION}\nOptions:\n{OPTIONS}";
  return p;
}

PromptSet PromptSet::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::kConfig, "prompt dir " + dir.string() + " not found");
  PromptSet p = defaults();
  const std::pair<const char*, std::string*> files[] = {
      {"system", &p.system},         {"reasoning", &p.reasoning},
      {"no_reasoning", &p.no_reasoning}, {"stage1", &p.stage1},
      {"stage2", &p.stage2},         {"stage2_no_leaf", &p.stage2_no_leaf},
      {"open_set", &p.open_set},     {"listing", &p.listing},
      {"listing_leaf", &p.listing_leaf}, {"sft", &p.sft},
  };
  bool overridden = false;
  for (const auto& [name, field] : files) {
    const auto path = dir / (std::string(name) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    *field = buf.str();
    while (!field->empty() && (field->back() == '\n' || field->back() == '\r')) field->pop_back();
    overridden = true;
  }
  const auto version_path = dir / "VERSION";
  if (std::filesystem::exists(version_path)) {
    std::ifstream in(version_path);
    std::getline(in, p.version);
  } else if (overridden) {
    p.version = "custom:" + dir.filename().string();
  }
  return p;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = slots.find(tmpl.substr(i + 1, close - i - 1));
        if (it != slots.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string format_options(std::span<const Option> options) {
  std::string out;
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (i) out.push_back('\n');
    out.push_back(options[i].letter);
    out += ". ";
    out += options[i].label;
  }
  return out;
}

std::string question_text(std::string_view level_name) {
  return "What is the " + std::string(level_name) + " of the organism in the image?";
}

std::string level_listing(const Taxonomy& taxonomy) {
  std::string out;
  for (const auto& name : taxonomy.level_names()) {
    if (!out.empty()) out += " -> ";
    out += name;
  }
  return out;
}

}  // namespace taxon
