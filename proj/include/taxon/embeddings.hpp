// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace taxon {

/**
 * Unit-norm vectors keyed by label text or image reference.
 *
 * Vectors within 1e-3 of unit norm are re-normalized on insertion; anything
 * further off is rejected. All vectors share one dimension, fixed by the
 * first insertion when the table is default-constructed.
 *
 * File format (JSONL): {"key": "...", "vec": [f32, ...]} per line.
 */
class EmbeddingTable {
 public:
  static constexpr double kNormTolerance = 1e-3;

  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  static EmbeddingTable load(std::istream& in);
  static EmbeddingTable load_file(const std::filesystem::path& path);
  void write(std::ostream& out) const;

  void add(std::string key, std::vector<double> vec);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(std::string_view key) const { return entries_.find(key) != entries_.end(); }
  std::span<const double> get(std::string_view key) const;

 private:
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<double>, std::less<>> entries_;
};

struct ScoredKey {
  std::string key;
  double similarity = 0.0;

  bool operator==(const ScoredKey&) const = default;
};

// Top min(k, |candidates|) candidates by descending cosine similarity to
// `query`; ties go to the lexicographically smaller key. The query need not
// be normalized. Duplicate candidates count once.
std::vector<ScoredKey> cosine_topk(const EmbeddingTable& table, std::span<const double> query,
                                   std::span<const std::string> candidates, std::size_t k);

}  // namespace taxon
