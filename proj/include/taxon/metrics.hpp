// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "taxon/orchestrator.hpp"

namespace taxon {

// Exact count ratio; value() is the double used for reporting.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Ratio&) const = default;
};

// Records with every level correct over all records.
Ratio hca_ratio(std::span<const EvalRecord> records);
// Records whose deepest level is correct over all records.
Ratio acc_leaf_ratio(std::span<const EvalRecord> records);
// HCA over the records whose leaf is correct; nullopt when there are none.
std::optional<Ratio> hca_given_leaf_ratio(std::span<const EvalRecord> records);
// Per level index: correct over records that have that level.
std::vector<Ratio> per_level_ratio(std::span<const EvalRecord> records);
// Generated tokens attributable to each prediction over the number of
// predictions. A shared call counts once for every level it serves.
Ratio token_ratio(std::span<const EvalRecord> records);

double hca(std::span<const EvalRecord> records);
double acc_leaf(std::span<const EvalRecord> records);
std::optional<double> hca_given_leaf(std::span<const EvalRecord> records);
std::vector<double> per_level_accuracy(std::span<const EvalRecord> records);
double avg_tokens(std::span<const EvalRecord> records);

struct MetricReport {
  std::size_t n = 0;
  std::size_t failed = 0;
  Ratio hca;
  Ratio acc_leaf;
  std::optional<Ratio> hca_given_leaf;
  std::vector<Ratio> per_level;
  std::vector<std::string> level_names;
  Ratio tokens;
};

MetricReport compute_report(std::span<const EvalRecord> records);

nlohmann::json report_to_json(const MetricReport& report);

struct ReportRow {
  std::string method;
  std::string dataset;
  MetricReport report;
};

// Markdown with a method x dataset HCA / Acc_leaf table, followed by a detail
// table (HCA (L), TKs, counts) and per-level accuracies.
std::string render_markdown(std::span<const ReportRow> rows);

}  // namespace taxon
