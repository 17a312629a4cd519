// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "taxon/errors.hpp"
#include "taxon/response.hpp"
#include "taxon/text.hpp"

namespace taxon {

namespace {

constexpr std::pair<RunMode, std::string_view> kModeNames[] = {
    {RunMode::kFullTwoStage, "full_two_stage"}, {RunMode::kNoReasoning, "no_reasoning"},
    {RunMode::kNoFirstStage, "no_first_stage"}, {RunMode::kDirectListing, "direct_listing"},
    {RunMode::kLeafCondition, "leaf_condition"}, {RunMode::kOpenSet, "open_set"},
};

bool is_listing(RunMode mode) { return mode == RunMode::kDirectListing || mode == RunMode::kLeafCondition; }

std::vector<Message> with_system(const PromptSet& prompts, std::string user) {
  std::vector<Message> messages;
  if (!prompts.system.empty()) messages.push_back(Message{"system", prompts.system});
  messages.push_back(Message{"user", std::move(user)});
  return messages;
}

const std::string& reasoning_text(const PromptSet& prompts, bool reasoning) {
  return reasoning ? prompts.reasoning : prompts.no_reasoning;
}

}  // namespace

std::string_view to_string(RunMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

RunMode run_mode_from_string(std::string_view name) {
  for (const auto& [m, n] : kModeNames) {
    if (n == name) return m;
  }
  throw Error(ErrorCode::kConfig, "unknown run mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Serialization

void to_json(nlohmann::json& j, const EvalRecord& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : r.levels) {
    levels.push_back({{"level", l.level},
                      {"level_name", l.level_name},
                      {"true", l.true_label},
                      {"predicted", l.predicted},
                      {"correct", l.correct},
                      {"tokens", l.tokens},
                      {"well_formed", l.well_formed},
                      {"transcript", l.transcript}});
  }
  j = nlohmann::json{{"image", r.image_ref},
                     {"leaf", r.leaf},
                     {"mode", to_string(r.mode)},
                     {"levels", std::move(levels)},
                     {"stage1_leaf", r.stage1_leaf},
                     {"stage1_well_formed", r.stage1_well_formed},
                     {"stage1_transcript", r.stage1_transcript},
                     {"shared_tokens", r.shared_tokens},
                     {"token_counts", r.token_counts},
                     {"failed", r.failed},
                     {"error", r.error}};
}

void from_json(const nlohmann::json& j, EvalRecord& r) {
  r.image_ref = j.at("image").get<std::string>();
  r.leaf = j.value("leaf", std::string{});
  r.mode = run_mode_from_string(j.at("mode").get<std::string>());
  r.levels.clear();
  for (const auto& l : j.at("levels")) {
    LevelOutcome o;
    o.level = l.at("level").get<std::size_t>();
    o.level_name = l.value("level_name", std::string{});
    o.true_label = l.value("true", std::string{});
    o.predicted = l.value("predicted", std::string{});
    o.correct = l.at("correct").get<bool>();
    o.tokens = l.value("tokens", std::size_t{0});
    o.well_formed = l.value("well_formed", false);
    o.transcript = l.value("transcript", std::string{});
    r.levels.push_back(std::move(o));
  }
  r.stage1_leaf = j.value("stage1_leaf", std::string{});
  r.stage1_well_formed = j.value("stage1_well_formed", false);
  r.stage1_transcript = j.value("stage1_transcript", std::string{});
  r.shared_tokens = j.value("shared_tokens", std::vector<std::size_t>{});
  r.token_counts = j.value("token_counts", std::vector<std::size_t>{});
  r.failed = j.value("failed", false);
  r.error = j.value("error", std::string{});
}

std::vector<EvalRecord> read_records(std::istream& in) {
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<EvalRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_records(std::ostream& out, std::span<const EvalRecord> records) {
  for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Prompts

std::vector<Message> stage1_messages(const Taxonomy& taxonomy, const PromptSet& prompts, bool reasoning) {
  return with_system(prompts, render(prompts.stage1, {{"LEVELS", level_listing(taxonomy)},
                                                      {"REASONING", reasoning_text(prompts, reasoning)}}));
}

std::vector<Message> stage2_messages(const PromptSet& prompts, const Question& question,
                                     const std::optional<std::string>& leaf, bool reasoning) {
  std::map<std::string, std::string, std::less<>> slots{
      {"LEVEL", question.level_name},
      {"QUESTION", question_text(question.level_name)},
      {"OPTIONS", format_options(question.options)},
      {"REASONING", reasoning_text(prompts, reasoning)},
  };
  if (leaf) slots.emplace("LEAF", *leaf);
  const std::string& tmpl = question.mode == QuestionMode::kOpenSet ? prompts.open_set
                            : leaf                                  ? prompts.stage2
                                                                    : prompts.stage2_no_leaf;
  return with_system(prompts, render(tmpl, slots));
}

std::vector<Message> listing_messages(const Taxonomy& taxonomy, const PromptSet& prompts,
                                      const std::optional<std::string>& leaf) {
  std::map<std::string, std::string, std::less<>> slots{{"LEVELS", level_listing(taxonomy)},
                                                        {"REASONING", prompts.reasoning}};
  if (leaf) slots.emplace("LEAF", *leaf);
  return with_system(prompts, render(leaf ? prompts.listing_leaf : prompts.listing, slots));
}

// ---------------------------------------------------------------------------
// Stages

Stage1Result stage1_infer(ModelBackend& backend, const Taxonomy& taxonomy, const std::string& image_ref,
                          const PromptSet& prompts, RunMode mode) {
  const auto messages = stage1_messages(taxonomy, prompts, mode != RunMode::kNoReasoning);
  CallContext ctx{image_ref, 1, std::string(to_string(mode)), std::nullopt, std::nullopt, {}};
  const Completion c = backend.complete(messages, ctx);
  const ParsedResponse parsed = parse_tagged(c.text);
  Stage1Result r;
  r.transcript = c.text;
  r.tokens = c.tokens;
  r.well_formed = parsed.well_formed;
  r.leaf = parsed.well_formed ? extract_name(parsed.answer) : std::string(kUnknownLabel);
  if (r.leaf.empty()) r.leaf = kUnknownLabel;
  return r;
}

Stage2Result stage2_answer(ModelBackend& backend, const Question& question,
                           const std::optional<std::string>& stage1_leaf, const PromptSet& prompts, RunMode mode) {
  const auto messages = stage2_messages(prompts, question, stage1_leaf, mode != RunMode::kNoReasoning);
  CallContext ctx{question.image_ref, 2, std::string(to_string(mode)), question.level, stage1_leaf,
                  question.options};
  const Completion c = backend.complete(messages, ctx);
  const ParsedResponse parsed = parse_tagged(c.text);
  Stage2Result r;
  r.transcript = c.text;
  r.tokens = c.tokens;
  r.well_formed = parsed.well_formed;
  if (!parsed.well_formed) return r;
  if (question.mode == QuestionMode::kMultipleChoice) {
    if (auto letter = extract_choice(parsed.answer, question.options)) {
      r.predicted = std::string(1, *letter);
      r.correct = question.answer_letter && *letter == *question.answer_letter;
    }
  } else {
    r.predicted = extract_name(parsed.answer);
    r.correct = names_match(r.predicted, question.answer);
  }
  return r;
}

std::vector<std::string> parse_listing(std::string_view answer, std::span<const std::string> level_names) {
  std::vector<std::string> out;
  for (const auto& raw : text::split_lines(answer)) {
    std::string_view line = text::trim(raw);
    if (line.empty()) continue;
    if (line.starts_with("- ") || line.starts_with("* ")) {
      line = text::trim(line.substr(2));
    } else if (line.starts_with("\xE2\x80\xA2")) {
      line = text::trim(line.substr(3));
    } else {
      std::size_t d = 0;
      while (d < line.size() && line[d] >= '0' && line[d] <= '9') ++d;
      if (d > 0 && d < line.size() && (line[d] == '.' || line[d] == ')')) line = text::trim(line.substr(d + 1));
    }
    if (const auto colon = line.find(':'); colon != std::string_view::npos) {
      const std::string prefix = text::ascii_lower(text::trim(line.substr(0, colon)));
      for (const auto& name : level_names) {
        if (text::ascii_lower(name) == prefix) {
          line = text::trim(line.substr(colon + 1));
          break;
        }
      }
    }
    out.push_back(extract_name(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run

namespace {

struct ImageJob {
  std::string image_ref;
  std::string leaf;
  std::vector<const Question*> questions;  // sorted by level
};

std::vector<ImageJob> group_questions(const Taxonomy& taxonomy, std::span<const Question> questions, RunMode mode) {
  std::vector<ImageJob> jobs;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const auto& q : questions) {
    auto [it, inserted] = index.emplace(q.image_ref, jobs.size());
    if (inserted) jobs.push_back(ImageJob{q.image_ref, q.leaf, {}});
    ImageJob& job = jobs[it->second];
    if (job.leaf != q.leaf) {
      throw Error(ErrorCode::kInvalidQuestionSet,
                  "image " + q.image_ref + " has questions with leaves '" + job.leaf + "' and '" + q.leaf + "'");
    }
    job.questions.push_back(&q);
  }
  for (auto& job : jobs) {
    if (!taxonomy.is_leaf(job.leaf)) {
      throw Error(ErrorCode::kInvalidQuestionSet, "image " + job.image_ref + ": '" + job.leaf + "' is not a leaf");
    }
    if (is_listing(mode)) continue;
    const std::size_t depth = taxonomy.depth(job.leaf);
    std::sort(job.questions.begin(), job.questions.end(),
              [](const Question* a, const Question* b) { return a->level < b->level; });
    bool covered = job.questions.size() == depth;
    for (std::size_t i = 0; covered && i < depth; ++i) covered = job.questions[i]->level == i;
    if (!covered) {
      throw Error(ErrorCode::kInvalidQuestionSet, "image " + job.image_ref + " needs exactly one question per level 0.." +
                                                      std::to_string(depth - 1));
    }
    const QuestionMode wanted = mode == RunMode::kOpenSet ? QuestionMode::kOpenSet : QuestionMode::kMultipleChoice;
    for (const Question* q : job.questions) {
      if (q->mode != wanted) {
        throw Error(ErrorCode::kInvalidQuestionSet, "question " + q->id + " is " + std::string(to_string(q->mode)) +
                                                        ", mode " + std::string(to_string(mode)) + " needs " +
                                                        std::string(to_string(wanted)));
      }
    }
  }
  return jobs;
}

void fill_failed(EvalRecord& rec, const Taxonomy& taxonomy, const std::vector<std::string>& path,
                 std::string error) {
  rec.failed = true;
  rec.error = std::move(error);
  std::vector<LevelOutcome> levels;
  for (std::size_t j = 0; j < path.size(); ++j) {
    LevelOutcome o;
    o.level = j;
    o.level_name = taxonomy.level_names()[j];
    o.true_label = path[j];
    // Keep whatever finished before the failure.
    if (j < rec.levels.size()) o = rec.levels[j];
    levels.push_back(std::move(o));
  }
  rec.levels = std::move(levels);
}

EvalRecord process_image(ModelBackend& backend, const Taxonomy& taxonomy, const ImageJob& job,
                         const RunOptions& options) {
  EvalRecord rec;
  rec.image_ref = job.image_ref;
  rec.leaf = job.leaf;
  rec.mode = options.mode;
  const auto path = taxonomy.ancestor_path(job.leaf);
  try {
    if (is_listing(options.mode)) {
      const std::optional<std::string> leaf =
          options.mode == RunMode::kLeafCondition ? std::optional<std::string>(job.leaf) : std::nullopt;
      const auto messages = listing_messages(taxonomy, options.prompts, leaf);
      CallContext ctx{job.image_ref, 1, std::string(to_string(options.mode)), std::nullopt, leaf, {}};
      const Completion c = backend.complete(messages, ctx);
      const ParsedResponse parsed = parse_tagged(c.text);
      rec.stage1_transcript = c.text;
      rec.stage1_well_formed = parsed.well_formed;
      rec.shared_tokens.push_back(c.tokens);
      rec.token_counts.push_back(c.tokens);
      const auto listed = parsed.well_formed ? parse_listing(parsed.answer, taxonomy.level_names())
                                             : std::vector<std::string>{};
      rec.stage1_leaf = listed.size() >= path.size() ? listed[path.size() - 1] : std::string(kUnknownLabel);
      for (std::size_t j = 0; j < path.size(); ++j) {
        LevelOutcome o;
        o.level = j;
        o.level_name = taxonomy.level_names()[j];
        o.true_label = path[j];
        o.well_formed = parsed.well_formed;
        if (j < listed.size()) {
          o.predicted = listed[j];
          o.correct = names_match(listed[j], path[j]);
        }
        rec.levels.push_back(std::move(o));
      }
      return rec;
    }

    std::optional<std::string> condition;
    if (options.mode != RunMode::kNoFirstStage) {
      const Stage1Result s1 = stage1_infer(backend, taxonomy, job.image_ref, options.prompts, options.mode);
      rec.stage1_leaf = s1.leaf;
      rec.stage1_transcript = s1.transcript;
      rec.stage1_well_formed = s1.well_formed;
      rec.shared_tokens.push_back(s1.tokens);
      rec.token_counts.push_back(s1.tokens);
      condition = s1.leaf;
    }
    for (const Question* q : job.questions) {
      const Stage2Result s2 = stage2_answer(backend, *q, condition, options.prompts, options.mode);
      rec.token_counts.push_back(s2.tokens);
      LevelOutcome o;
      o.level = q->level;
      o.level_name = q->level_name.empty() ? taxonomy.level_names()[q->level] : q->level_name;
      o.true_label = q->answer;
      o.predicted = s2.predicted;
      o.correct = s2.correct;
      o.tokens = s2.tokens;
      o.transcript = s2.transcript;
      o.well_formed = s2.well_formed;
      rec.levels.push_back(std::move(o));
    }
  } catch (const Error& e) {
    fill_failed(rec, taxonomy, path, e.what());
  }
  return rec;
}

}  // namespace

RunResult run(ModelBackend& backend, const Taxonomy& taxonomy, std::span<const Question> questions,
              const RunOptions& options) {
  const auto jobs = group_questions(taxonomy, questions, options.mode);
  RunResult result;
  result.records.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        result.records[i] = process_image(backend, taxonomy, jobs[i], options);
      } catch (...) {
        std::lock_guard g(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };

  const std::size_t threads = std::min(std::max<std::size_t>(options.max_inflight, 1), jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  result.failures = static_cast<std::size_t>(
      std::count_if(result.records.begin(), result.records.end(), [](const EvalRecord& r) { return r.failed; }));
  return result;
}

}  // namespace taxon
