// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace taxon {

/**
 * Immutable taxonomic hierarchy with named levels (most general first).
 *
 * Nodes are identified by (level, label); a label may repeat across levels
 * but never within one. Leaves are nodes without children and may sit at
 * different depths (ragged hierarchies). Level 0 may hold several labels, in
 * which case the hierarchy is a forest under an implicit root.
 *
 * CSV format: header row names the levels, each body row is one root-first
 * path. Rows shorter than the header end at a shallower leaf.
 */
class Taxonomy {
 public:
  struct Node {
    std::string label;
    std::size_t level = 0;
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;
  };

  static Taxonomy load(std::istream& in);
  static Taxonomy load_file(const std::filesystem::path& path);
  static Taxonomy parse(std::string_view csv);
  static Taxonomy from_paths(std::vector<std::string> level_names,
                             const std::vector<std::vector<std::string>>& paths);

  // Header plus one row per leaf path, sorted; load(write(t)) is isomorphic to t.
  void write(std::ostream& out) const;
  std::string to_csv() const;

  const std::vector<std::string>& level_names() const { return level_names_; }
  std::size_t level_count() const { return level_names_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Root-first path ending at `label`. Leaves are looked up first; any other
  // node is accepted when its label is unambiguous across levels.
  std::vector<std::string> ancestor_path(std::string_view label) const;
  std::vector<std::string> path_of(std::size_t level, std::string_view label) const;

  // Sorted labels present at `level`.
  std::vector<std::string> level_label_set(std::size_t level) const;

  // Sorted leaf labels.
  std::vector<std::string> leaves() const;
  bool is_leaf(std::string_view label) const;
  std::size_t depth(std::string_view leaf) const;

  std::optional<std::size_t> find(std::size_t level, std::string_view label) const;

 private:
  void add_path(const std::vector<std::string>& path, std::size_t line);
  void finalize();
  std::vector<std::string> path_from(std::size_t node) const;
  std::size_t resolve(std::string_view label) const;

  std::vector<std::string> level_names_;
  std::vector<Node> nodes_;
  std::vector<std::map<std::string, std::size_t, std::less<>>> by_level_;
  std::map<std::string, std::size_t, std::less<>> leaf_index_;
};

}  // namespace taxon
