// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "taxon/errors.hpp"

namespace taxon {

namespace {

void require_nonempty(std::span<const EvalRecord> records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyRecords, "no records");
}

// Levels must be exactly 0..L-1, each once.
std::vector<const LevelOutcome*> ordered_levels(const EvalRecord& r) {
  std::vector<const LevelOutcome*> by_level(r.levels.size(), nullptr);
  for (const auto& l : r.levels) {
    if (l.level >= by_level.size() || by_level[l.level] != nullptr) {
      throw Error(ErrorCode::kIncompleteRecord, "record " + r.image_ref + " has missing or repeated levels");
    }
    by_level[l.level] = &l;
  }
  if (by_level.empty()) throw Error(ErrorCode::kIncompleteRecord, "record " + r.image_ref + " has no levels");
  return by_level;
}

bool all_correct(const EvalRecord& r) {
  const auto levels = ordered_levels(r);
  return std::all_of(levels.begin(), levels.end(), [](const LevelOutcome* l) { return l->correct; });
}

bool leaf_correct(const EvalRecord& r) { return ordered_levels(r).back()->correct; }

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

nlohmann::json ratio_json(const Ratio& r) { return {{"num", r.num}, {"den", r.den}, {"value", r.value()}}; }

}  // namespace

Ratio hca_ratio(std::span<const EvalRecord> records) {
  require_nonempty(records);
  Ratio r{0, records.size()};
  for (const auto& rec : records) r.num += all_correct(rec) ? 1 : 0;
  return r;
}

Ratio acc_leaf_ratio(std::span<const EvalRecord> records) {
  require_nonempty(records);
  Ratio r{0, records.size()};
  for (const auto& rec : records) r.num += leaf_correct(rec) ? 1 : 0;
  return r;
}

std::optional<Ratio> hca_given_leaf_ratio(std::span<const EvalRecord> records) {
  require_nonempty(records);
  Ratio r;
  for (const auto& rec : records) {
    if (!leaf_correct(rec)) continue;
    ++r.den;
    r.num += all_correct(rec) ? 1 : 0;
  }
  if (r.den == 0) return std::nullopt;
  return r;
}

std::vector<Ratio> per_level_ratio(std::span<const EvalRecord> records) {
  require_nonempty(records);
  std::vector<Ratio> out;
  for (const auto& rec : records) {
    const auto levels = ordered_levels(rec);
    if (out.size() < levels.size()) out.resize(levels.size());
    for (std::size_t j = 0; j < levels.size(); ++j) {
      ++out[j].den;
      out[j].num += levels[j]->correct ? 1 : 0;
    }
  }
  return out;
}

Ratio token_ratio(std::span<const EvalRecord> records) {
  require_nonempty(records);
  Ratio r;
  for (const auto& rec : records) {
    const std::uint64_t shared = std::accumulate(rec.shared_tokens.begin(), rec.shared_tokens.end(), std::uint64_t{0});
    for (const auto& l : rec.levels) {
      r.num += shared + l.tokens;
      ++r.den;
    }
  }
  if (r.den == 0) throw Error(ErrorCode::kIncompleteRecord, "records carry no predictions");
  return r;
}

double hca(std::span<const EvalRecord> records) { return hca_ratio(records).value(); }
double acc_leaf(std::span<const EvalRecord> records) { return acc_leaf_ratio(records).value(); }

std::optional<double> hca_given_leaf(std::span<const EvalRecord> records) {
  auto r = hca_given_leaf_ratio(records);
  if (!r) return std::nullopt;
  return r->value();
}

std::vector<double> per_level_accuracy(std::span<const EvalRecord> records) {
  std::vector<double> out;
  for (const auto& r : per_level_ratio(records)) out.push_back(r.value());
  return out;
}

double avg_tokens(std::span<const EvalRecord> records) { return token_ratio(records).value(); }

MetricReport compute_report(std::span<const EvalRecord> records) {
  MetricReport m;
  m.n = records.size();
  m.failed = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const EvalRecord& r) { return r.failed; }));
  m.hca = hca_ratio(records);
  m.acc_leaf = acc_leaf_ratio(records);
  m.hca_given_leaf = hca_given_leaf_ratio(records);
  m.per_level = per_level_ratio(records);
  m.level_names.resize(m.per_level.size());
  for (const auto& rec : records) {
    for (const auto& l : rec.levels) {
      if (l.level < m.level_names.size() && m.level_names[l.level].empty()) m.level_names[l.level] = l.level_name;
    }
  }
  m.tokens = token_ratio(records);
  return m;
}

nlohmann::json report_to_json(const MetricReport& m) {
  nlohmann::json per_level = nlohmann::json::array();
  for (std::size_t j = 0; j < m.per_level.size(); ++j) {
    auto entry = ratio_json(m.per_level[j]);
    entry["level"] = j;
    entry["level_name"] = m.level_names[j];
    per_level.push_back(std::move(entry));
  }
  return nlohmann::json{
      {"n", m.n},
      {"failed", m.failed},
      {"hca", m.hca.value()},
      {"acc_leaf", m.acc_leaf.value()},
      {"hca_given_leaf", m.hca_given_leaf ? nlohmann::json(m.hca_given_leaf->value()) : nlohmann::json(nullptr)},
      {"avg_tokens", m.tokens.value()},
      {"per_level_acc", per_level},
      {"counts",
       {{"hca", ratio_json(m.hca)},
        {"acc_leaf", ratio_json(m.acc_leaf)},
        {"hca_given_leaf", m.hca_given_leaf ? ratio_json(*m.hca_given_leaf) : nlohmann::json(nullptr)},
        {"tokens", ratio_json(m.tokens)}}},
  };
}

std::string render_markdown(std::span<const ReportRow> rows) {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  for (const auto& row : rows) {
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) methods.push_back(row.method);
    if (std::find(datasets.begin(), datasets.end(), row.dataset) == datasets.end()) datasets.push_back(row.dataset);
  }
  auto find_row = [&](const std::string& method, const std::string& dataset) -> const ReportRow* {
    for (const auto& row : rows) {
      if (row.method == method && row.dataset == dataset) return &row;
    }
    return nullptr;
  };

  std::ostringstream md;
  md << "| Method |";
  for (const auto& d : datasets) md << ' ' << d << " HCA | " << d << " Acc_leaf |";
  md << "\n|---|";
  for (std::size_t i = 0; i < datasets.size(); ++i) md << "---:|---:|";
  md << '\n';
  for (const auto& m : methods) {
    md << "| " << m << " |";
    for (const auto& d : datasets) {
      const ReportRow* row = find_row(m, d);
      if (row) {
        md << ' ' << percent(row->report.hca.value()) << " | " << percent(row->report.acc_leaf.value()) << " |";
      } else {
        md << " - | - |";
      }
    }
    md << '\n';
  }

  md << "\n| Method | Dataset | N | Failed | HCA | Acc_leaf | HCA (L) | TKs |\n";
  md << "|---|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    md << "| " << row.method << " | " << row.dataset << " | " << r.n << " | " << r.failed << " | "
       << percent(r.hca.value()) << " | " << percent(r.acc_leaf.value()) << " | "
       << (r.hca_given_leaf ? percent(r.hca_given_leaf->value()) : std::string("-")) << " | "
       << fixed2(r.tokens.value()) << " |\n";
  }

  for (const auto& row : rows) {
    md << "\nPer-level accuracy, " << row.method << " / " << row.dataset << ":\n\n| Level | Accuracy |\n|---|---:|\n";
    for (std::size_t j = 0; j < row.report.per_level.size(); ++j) {
      const std::string& name = row.report.level_names[j];
      md << "| " << (name.empty() ? std::to_string(j) : name) << " | " << percent(row.report.per_level[j].value())
         << " |\n";
    }
  }
  return md.str();
}

}  // namespace taxon
