// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "taxon/errors.hpp"
#include "taxon/text.hpp"

namespace taxon {

namespace {

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

bool all_blank(const std::vector<std::string>& fields) {
  return std::all_of(fields.begin(), fields.end(), [](const std::string& f) { return f.empty(); });
}

}  // namespace

Taxonomy Taxonomy::load(std::istream& in) {
  Taxonomy t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool have_rows = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (text::trim(line).empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = text::split_csv_row(line);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, at_line(line_no) + e.what());
    }
    for (auto& f : fields) f = std::string(text::trim(f));
    if (!have_header) {
      for (const auto& f : fields) {
        if (f.empty()) throw Error(ErrorCode::kRowArityMismatch, at_line(line_no) + "empty level name in header");
      }
      t.level_names_ = std::move(fields);
      t.by_level_.resize(t.level_names_.size());
      have_header = true;
      continue;
    }
    if (all_blank(fields)) continue;
    while (!fields.empty() && fields.back().empty()) fields.pop_back();
    if (fields.size() > t.level_names_.size()) {
      throw Error(ErrorCode::kRowArityMismatch,
                  at_line(line_no) + "row has " + std::to_string(fields.size()) + " columns, header has " +
                      std::to_string(t.level_names_.size()));
    }
    if (std::any_of(fields.begin(), fields.end(), [](const std::string& f) { return f.empty(); })) {
      throw Error(ErrorCode::kRowArityMismatch, at_line(line_no) + "empty label inside path");
    }
    t.add_path(fields, line_no);
    have_rows = true;
  }
  if (!have_header || !have_rows) throw Error(ErrorCode::kEmptyInput, "taxonomy has no data rows");
  t.finalize();
  return t;
}

Taxonomy Taxonomy::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open taxonomy file " + path.string());
  try {
    return load(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Taxonomy Taxonomy::parse(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  return load(in);
}

Taxonomy Taxonomy::from_paths(std::vector<std::string> level_names,
                              const std::vector<std::vector<std::string>>& paths) {
  if (level_names.empty() || paths.empty()) throw Error(ErrorCode::kEmptyInput, "no levels or no paths");
  Taxonomy t;
  t.level_names_ = std::move(level_names);
  t.by_level_.resize(t.level_names_.size());
  std::size_t row = 0;
  for (const auto& raw : paths) {
    ++row;
    std::vector<std::string> path;
    path.reserve(raw.size());
    for (const auto& label : raw) path.emplace_back(text::trim(label));
    if (path.empty() || path.size() > t.level_names_.size()) {
      throw Error(ErrorCode::kRowArityMismatch, "path " + std::to_string(row) + " has " +
                                                    std::to_string(path.size()) + " labels");
    }
    t.add_path(path, row);
  }
  t.finalize();
  return t;
}

void Taxonomy::add_path(const std::vector<std::string>& path, std::size_t line) {
  std::optional<std::size_t> parent;
  for (std::size_t level = 0; level < path.size(); ++level) {
    const std::string& label = path[level];
    if (label.empty()) throw Error(ErrorCode::kRowArityMismatch, at_line(line) + "empty label");
    auto& index = by_level_[level];
    auto it = index.find(label);
    if (it != index.end()) {
      const Node& existing = nodes_[it->second];
      if (existing.parent != parent) {
        throw Error(ErrorCode::kParentConflict,
                    at_line(line) + "'" + label + "' at level " + level_names_[level] + " has parent '" +
                        (existing.parent ? nodes_[*existing.parent].label : std::string("<root>")) +
                        "' and '" + (parent ? nodes_[*parent].label : std::string("<root>")) + "'");
      }
      parent = it->second;
      continue;
    }
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{label, level, parent, {}});
    if (parent) nodes_[*parent].children.push_back(id);
    index.emplace(label, id);
    parent = id;
  }
}

void Taxonomy::finalize() {
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (!n.children.empty()) continue;
    auto [it, inserted] = leaf_index_.emplace(n.label, id);
    if (!inserted) {
      throw Error(ErrorCode::kAmbiguousLabel, "leaf label '" + n.label + "' occurs at levels " +
                                                  level_names_[nodes_[it->second].level] + " and " +
                                                  level_names_[n.level]);
    }
  }
}

std::vector<std::string> Taxonomy::path_from(std::size_t node) const {
  std::vector<std::string> path(nodes_[node].level + 1);
  std::optional<std::size_t> cur = node;
  while (cur) {
    path[nodes_[*cur].level] = nodes_[*cur].label;
    cur = nodes_[*cur].parent;
  }
  return path;
}

std::size_t Taxonomy::resolve(std::string_view label) const {
  const std::string key(text::trim(label));
  if (auto it = leaf_index_.find(key); it != leaf_index_.end()) return it->second;
  std::optional<std::size_t> found;
  for (const auto& index : by_level_) {
    auto it = index.find(key);
    if (it == index.end()) continue;
    if (found) throw Error(ErrorCode::kAmbiguousLabel, "label '" + key + "' occurs at several levels");
    found = it->second;
  }
  if (!found) throw Error(ErrorCode::kUnknownLeaf, "no node labelled '" + key + "'");
  return *found;
}

std::vector<std::string> Taxonomy::ancestor_path(std::string_view label) const {
  return path_from(resolve(label));
}

std::vector<std::string> Taxonomy::path_of(std::size_t level, std::string_view label) const {
  auto id = find(level, label);
  if (!id) throw Error(ErrorCode::kUnknownLeaf, "no node '" + std::string(label) + "' at level " + std::to_string(level));
  return path_from(*id);
}

std::vector<std::string> Taxonomy::level_label_set(std::size_t level) const {
  if (level >= level_count()) {
    throw Error(ErrorCode::kLevelOutOfRange,
                "level " + std::to_string(level) + " outside [0, " + std::to_string(level_count()) + ")");
  }
  std::vector<std::string> labels;
  labels.reserve(by_level_[level].size());
  for (const auto& [label, id] : by_level_[level]) labels.push_back(label);
  return labels;
}

std::vector<std::string> Taxonomy::leaves() const {
  std::vector<std::string> out;
  out.reserve(leaf_index_.size());
  for (const auto& [label, id] : leaf_index_) out.push_back(label);
  return out;
}

bool Taxonomy::is_leaf(std::string_view label) const {
  return leaf_index_.find(text::trim(label)) != leaf_index_.end();
}

std::size_t Taxonomy::depth(std::string_view leaf) const {
  auto it = leaf_index_.find(text::trim(leaf));
  if (it == leaf_index_.end()) throw Error(ErrorCode::kUnknownLeaf, "unknown leaf '" + std::string(leaf) + "'");
  return nodes_[it->second].level + 1;
}

std::optional<std::size_t> Taxonomy::find(std::size_t level, std::string_view label) const {
  if (level >= by_level_.size()) return std::nullopt;
  auto it = by_level_[level].find(text::trim(label));
  if (it == by_level_[level].end()) return std::nullopt;
  return it->second;
}

void Taxonomy::write(std::ostream& out) const {
  out << text::join_csv_row(level_names_) << '\n';
  std::vector<std::vector<std::string>> rows;
  rows.reserve(leaf_index_.size());
  for (const auto& [label, id] : leaf_index_) rows.push_back(path_from(id));
  std::sort(rows.begin(), rows.end());
  for (const auto& row : rows) out << text::join_csv_row(row) << '\n';
}

std::string Taxonomy::to_csv() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

}  // namespace taxon
