// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "taxon/errors.hpp"
#include "taxon/text.hpp"

namespace taxon {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void EmbeddingTable::add(std::string key, std::vector<double> vec) {
  if (vec.empty()) throw Error(ErrorCode::kDimMismatch, "empty vector for '" + key + "'");
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw Error(ErrorCode::kDimMismatch, "'" + key + "' has dim " + std::to_string(vec.size()) + ", table dim " +
                                             std::to_string(dim_));
  }
  const double n = norm(vec);
  if (!std::isfinite(n) || std::abs(n - 1.0) > kNormTolerance) {
    throw Error(ErrorCode::kNotUnitNorm, "'" + key + "' has norm " + std::to_string(n));
  }
  for (double& x : vec) x /= n;
  auto [it, inserted] = entries_.emplace(std::move(key), std::move(vec));
  if (!inserted) throw Error(ErrorCode::kDuplicateKey, "duplicate embedding key '" + it->first + "'");
}

std::span<const double> EmbeddingTable::get(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorCode::kUnknownKey, "no embedding for '" + std::string(key) + "'");
  return it->second;
}

EmbeddingTable EmbeddingTable::load(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      table.add(j.at("key").get<std::string>(), j.at("vec").get<std::vector<double>>());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (table.size() == 0) throw Error(ErrorCode::kEmptyInput, "no embeddings");
  return table;
}

EmbeddingTable EmbeddingTable::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open embeddings file " + path.string());
  try {
    return load(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void EmbeddingTable::write(std::ostream& out) const {
  for (const auto& [key, vec] : entries_) {
    out << nlohmann::json{{"key", key}, {"vec", vec}}.dump() << '\n';
  }
}

std::vector<ScoredKey> cosine_topk(const EmbeddingTable& table, std::span<const double> query,
                                   std::span<const std::string> candidates, std::size_t k) {
  if (query.size() != table.dim()) {
    throw Error(ErrorCode::kDimMismatch, "query dim " + std::to_string(query.size()) + ", table dim " +
                                             std::to_string(table.dim()));
  }
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "no candidates");
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  const double qn = norm(query);
  if (!(qn > 0.0) || !std::isfinite(qn)) throw Error(ErrorCode::kInvalidArgument, "query has zero or non-finite norm");

  const std::set<std::string_view> unique(candidates.begin(), candidates.end());
  std::vector<ScoredKey> scored;
  scored.reserve(unique.size());
  for (std::string_view key : unique) {
    const auto v = table.get(key);
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * query[i];
    scored.push_back(ScoredKey{std::string(key), dot / qn});
  }
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    [](const ScoredKey& a, const ScoredKey& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.key < b.key;
                    });
  scored.resize(n);
  return scored;
}

}  // namespace taxon
