// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "taxon/backend.hpp"
#include "taxon/config.hpp"
#include "taxon/dataset.hpp"
#include "taxon/embeddings.hpp"
#include "taxon/errors.hpp"
#include "taxon/grpo.hpp"
#include "taxon/metrics.hpp"
#include "taxon/orchestrator.hpp"
#include "taxon/prompts.hpp"
#include "taxon/rng.hpp"
#include "taxon/taxonomy.hpp"
#include "taxon/text.hpp"

namespace taxon::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> taxonomy;
  std::optional<std::string> embeddings;
  std::optional<std::string> images;
  std::optional<std::string> questions;
  std::optional<std::string> fixtures;
  std::optional<std::string> prompt_dir;
  std::optional<std::string> mode;
  std::optional<std::size_t> max_inflight;
  std::optional<std::size_t> images_per_species;
  std::optional<std::string> distractor_source;
  std::optional<std::string> sft_mode;
  std::optional<std::string> mock;
  std::optional<std::string> method;
  std::optional<std::string> dataset;
  std::optional<std::size_t> steps;
  std::optional<double> learning_rate;
  std::optional<double> beta;
  std::optional<std::size_t> group_size;
  std::optional<double> clip_eps;
  std::optional<std::size_t> contexts;
  std::optional<std::size_t> inner_steps;
  std::vector<std::string> records;
  std::vector<std::string> labels;
};

template <typename T, typename F>
void apply(const std::optional<T>& v, F&& f) {
  if (v) f(*v);
}

// Flag values are wrapped as config errors so they exit 1 like bad files.
template <typename F>
auto as_config_error(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig c = o.config ? load_config(*o.config) : RunConfig{};
  apply(o.seed, [&](auto v) {
    c.seed = v;
    c.grpo.seed = v;
  });
  apply(o.output_dir, [&](const auto& v) { c.output_dir = v; });
  apply(o.taxonomy, [&](const auto& v) { c.taxonomy = v; });
  apply(o.embeddings, [&](const auto& v) { c.embeddings = v; });
  apply(o.images, [&](const auto& v) { c.images = v; });
  apply(o.questions, [&](const auto& v) { c.questions = v; });
  apply(o.fixtures, [&](const auto& v) { c.fixtures = v; });
  apply(o.prompt_dir, [&](const auto& v) { c.prompt_dir = v; });
  apply(o.mode, [&](const auto& v) { c.mode = as_config_error([&] { return run_mode_from_string(v); }); });
  apply(o.max_inflight, [&](auto v) { c.max_inflight = c.endpoint.max_inflight = v; });
  apply(o.images_per_species, [&](auto v) { c.images_per_species = v; });
  apply(o.distractor_source, [&](const auto& v) { c.distractor_source = distractor_source_from_string(v); });
  apply(o.sft_mode, [&](const auto& v) { c.sft_mode = as_config_error([&] { return sft_mode_from_string(v); }); });
  apply(o.mock, [&](const auto& v) { c.mock = mock_kind_from_string(v); });
  apply(o.method, [&](const auto& v) { c.method = v; });
  apply(o.dataset, [&](const auto& v) { c.dataset = v; });
  apply(o.steps, [&](auto v) { c.grpo.steps = v; });
  apply(o.learning_rate, [&](auto v) { c.grpo.learning_rate = v; });
  apply(o.beta, [&](auto v) { c.grpo.beta = v; });
  apply(o.group_size, [&](auto v) { c.grpo.group_size = v; });
  apply(o.clip_eps, [&](auto v) { c.grpo.clip_eps = v; });
  apply(o.contexts, [&](auto v) { c.grpo.contexts = v; });
  apply(o.inner_steps, [&](auto v) { c.grpo.inner_steps = v; });
  if (c.max_inflight == 0) throw Error(ErrorCode::kConfig, "max_inflight must be at least 1");
  if (c.images_per_species == 0) throw Error(ErrorCode::kConfig, "images_per_species must be at least 1");
  as_config_error([&] {
    c.grpo.validate();
    return 0;
  });
  if (c.method.empty()) c.method = std::string(to_string(c.mode));
  return c;
}

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorCode::kConfig, std::string("no ") + what + " path given");
  if (!fs::exists(p)) throw Error(ErrorCode::kConfig, std::string(what) + " file not found: " + p.string());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Collects output files so the manifest can list their digests.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& contents) {
    fs::create_directories(dir_);
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::kIo, "cannot write " + (dir_ / name).string());
    f << contents;
    if (!f) throw Error(ErrorCode::kIo, "write failed for " + (dir_ / name).string());
    digests_[name] = hex64(fnv1a64(contents));
  }

  void manifest(const std::string& command, const RunConfig& config, json counts, json extra = json::object()) {
    json m = {
        {"tool", "taxon"},
        {"version", tool_version()},
        {"command", command},
        {"config_hash", config_hash(config)},
        {"seed", config.seed},
        {"config", config_to_json(config)},
        {"counts", std::move(counts)},
        {"outputs", digests_},
    };
    m.update(extra);
    write("manifest.json", m.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> digests_;
};

json provenance(const RunConfig& config) {
  return {{"tool_version", tool_version()}, {"config_hash", config_hash(config)}, {"seed", config.seed}};
}

std::vector<ImageRecord> read_images(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> image_col;
  std::optional<std::size_t> leaf_col;
  std::vector<ImageRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    std::vector<std::string> cells;
    try {
      cells = text::split_csv_row(line);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    for (auto& c : cells) c = std::string(text::trim(c));
    if (!image_col) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "image") image_col = i;
        if (cells[i] == "leaf") leaf_col = i;
      }
      if (!image_col || !leaf_col) {
        throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) +
                                           ": header must name 'image' and 'leaf' columns");
      }
      continue;
    }
    if (cells.size() <= std::max(*image_col, *leaf_col)) {
      throw Error(ErrorCode::kRowArityMismatch, path.string() + ":" + std::to_string(line_no) + ": too few columns");
    }
    out.push_back({cells[*image_col], cells[*leaf_col]});
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyInput, path.string() + ": no images");
  return out;
}

std::string images_csv(std::span<const ImageRecord> images) {
  std::string s = "image,leaf\n";
  for (const auto& im : images) s += text::join_csv_row({im.image_ref, im.leaf}) + "\n";
  return s;
}

// Keeps at most `cap` images per leaf, chosen by a per-leaf shuffle; input
// order is preserved among the kept images.
std::vector<ImageRecord> cap_per_species(const std::vector<ImageRecord>& images, std::size_t cap, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_leaf;
  for (std::size_t i = 0; i < images.size(); ++i) by_leaf[images[i].leaf].push_back(i);
  std::vector<std::size_t> keep;
  const std::uint64_t stream = derive_seed(seed, "questions");
  for (auto& [leaf, idx] : by_leaf) {
    if (idx.size() > cap) {
      Rng rng(derive_seed(stream, leaf));
      rng.shuffle(std::span(idx));
      idx.resize(cap);
    }
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  std::vector<ImageRecord> out;
  for (std::size_t i : keep) out.push_back(images[i]);
  return out;
}

Taxonomy load_taxonomy(const RunConfig& c) {
  require_path(c.taxonomy, "taxonomy");
  return Taxonomy::load_file(c.taxonomy);
}

std::vector<Question> load_questions(const RunConfig& c) {
  require_path(c.questions, "questions");
  std::ifstream in(c.questions, std::ios::binary);
  try {
    return read_questions(in);
  } catch (const Error& e) {
    throw Error(e.code(), c.questions.string() + ": " + e.what());
  }
}

PromptSet load_prompts(const RunConfig& c) {
  return c.prompt_dir.empty() ? PromptSet::defaults() : PromptSet::load_dir(c.prompt_dir);
}

int cmd_build_questions(const RunConfig& c, std::ostream& out) {
  const Taxonomy taxonomy = load_taxonomy(c);
  require_path(c.images, "images");
  const auto all_images = read_images(c.images);
  const bool open = c.mode == RunMode::kOpenSet;
  EmbeddingTable table;
  if (!open) {
    require_path(c.embeddings, "embeddings");
    table = EmbeddingTable::load_file(c.embeddings);
  }
  const auto images = cap_per_species(all_images, c.images_per_species, c.seed);

  std::vector<Question> questions;
  std::map<std::string, int> species;
  for (const auto& im : images) {
    if (!taxonomy.is_leaf(im.leaf)) {
      throw Error(ErrorCode::kUnknownLeaf, c.images.string() + ": image " + im.image_ref + " names unknown leaf '" +
                                               im.leaf + "'");
    }
    ++species[im.leaf];
    std::span<const double> query;
    if (!open && c.distractor_source == DistractorSource::kImageToLabel) {
      if (!table.contains(im.image_ref)) {
        throw Error(ErrorCode::kMissingEmbedding, c.embeddings.string() + ": no embedding for image " + im.image_ref);
      }
      query = table.get(im.image_ref);
    }
    for (std::size_t level = 0; level < taxonomy.depth(im.leaf); ++level) {
      questions.push_back(open ? build_open_question(taxonomy, im, level)
                               : build_question(taxonomy, im, query, level, table, c.seed, c.distractor_source));
    }
  }

  std::ostringstream q;
  write_questions(q, questions);
  Outputs o(c.output_dir);
  o.write("questions.jsonl", q.str());
  o.manifest("build-questions", c,
             {{"images_in", all_images.size()},
              {"images_used", images.size()},
              {"species", species.size()},
              {"questions", questions.size()}});
  out << "wrote " << questions.size() << " questions for " << images.size() << " images to "
      << (c.output_dir / "questions.jsonl").string() << "\n";
  return kExitOk;
}

int cmd_split(const RunConfig& c, std::ostream& out) {
  const Taxonomy taxonomy = load_taxonomy(c);
  const SpeciesSplit split = split_by_species(taxonomy.leaves(), c.seed);
  Outputs o(c.output_dir);
  o.write("split.json", json{{"sft", split.sft}, {"rl", split.rl}}.dump(2) + "\n");
  json counts = {{"species", split.sft.size() + split.rl.size()},
                 {"sft_species", split.sft.size()},
                 {"rl_species", split.rl.size()}};
  if (!c.images.empty()) {
    require_path(c.images, "images");
    const auto images = read_images(c.images);
    const std::set<std::string> sft(split.sft.begin(), split.sft.end());
    std::vector<ImageRecord> a;
    std::vector<ImageRecord> b;
    for (const auto& im : images) {
      if (!taxonomy.is_leaf(im.leaf)) {
        throw Error(ErrorCode::kUnknownLeaf, c.images.string() + ": unknown leaf '" + im.leaf + "'");
      }
      (sft.contains(im.leaf) ? a : b).push_back(im);
    }
    o.write("sft_images.csv", images_csv(a));
    o.write("rl_images.csv", images_csv(b));
    counts["sft_images"] = a.size();
    counts["rl_images"] = b.size();
  }
  o.manifest("split", c, counts);
  out << "split " << split.sft.size() + split.rl.size() << " species: " << split.sft.size() << " sft, "
      << split.rl.size() << " rl\n";
  return kExitOk;
}

int cmd_export_sft(const RunConfig& c, std::ostream& out) {
  const Taxonomy taxonomy = load_taxonomy(c);
  const auto questions = load_questions(c);
  const PromptSet prompts = load_prompts(c);
  const auto records = export_sft_dataset(taxonomy, questions, prompts.sft, c.sft_mode);
  std::ostringstream s;
  write_sft_jsonl(s, records);
  Outputs o(c.output_dir);
  o.write("sft.jsonl", s.str());
  o.manifest("export-sft", c, {{"records", records.size()}}, {{"prompts_version", prompts.version}});
  out << "wrote " << records.size() << " sft records\n";
  return kExitOk;
}

std::unique_ptr<ModelBackend> make_backend(const RunConfig& c, const std::shared_ptr<const Taxonomy>& taxonomy,
                                           std::ostream& err) {
  if (!c.fixtures.empty()) {
    require_path(c.fixtures, "fixtures");
    ScriptedMock scripted = ScriptedMock::load_file(c.fixtures);
    if (c.mock == MockKind::kTaxonomy) return std::make_unique<TaxonomyFaithfulMock>(taxonomy, std::move(scripted));
    return std::make_unique<ScriptedMock>(std::move(scripted));
  }
  if (c.endpoint.url.empty()) throw Error(ErrorCode::kConfig, "neither fixtures nor endpoint.url is set");
  EndpointConfig e = c.endpoint;
  e.api_key = api_key_from_env();
  e.max_inflight = c.max_inflight;
  auto log = [&err](std::string_view line) { err << line << "\n"; };
  return std::make_unique<HttpBackend>(e, make_http_transport(e.timeout), log);
}

json report_document(const RunConfig& c, const MetricReport& report, std::string_view prompts_version) {
  json j = provenance(c);
  j["method"] = c.method;
  j["dataset"] = c.dataset;
  j["mode"] = to_string(c.mode);
  j["prompts_version"] = prompts_version;
  j["metrics"] = report_to_json(report);
  return j;
}

int cmd_eval(const RunConfig& c, std::ostream& out, std::ostream& err) {
  auto taxonomy = std::make_shared<const Taxonomy>(load_taxonomy(c));
  const auto questions = load_questions(c);
  const PromptSet prompts = load_prompts(c);
  auto backend = make_backend(c, taxonomy, err);

  const RunResult result = run(*backend, *taxonomy, questions, RunOptions{c.mode, c.max_inflight, prompts});
  const MetricReport report = compute_report(result.records);

  std::ostringstream recs;
  write_records(recs, result.records);
  Outputs o(c.output_dir);
  o.write("records.jsonl", recs.str());
  o.write("report.json", report_document(c, report, prompts.version).dump(2) + "\n");
  const ReportRow row{c.method, c.dataset, report};
  o.write("report.md", render_markdown(std::span(&row, 1)));
  o.manifest("eval", c,
             {{"images", result.records.size()}, {"questions", questions.size()}, {"failed", result.failures}},
             {{"prompts_version", prompts.version}});

  char line[160];
  std::snprintf(line, sizeof line, "%s: n=%zu hca=%.4f acc_leaf=%.4f failed=%zu\n", c.method.c_str(), report.n,
                report.hca.value(), report.acc_leaf.value(), result.failures);
  out << line;
  if (result.partial()) {
    err << "partial run: " << result.failures << " of " << result.records.size() << " images failed\n";
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_report(const RunConfig& c, const Overrides& o, std::ostream& out) {
  std::vector<std::string> paths = o.records;
  if (paths.empty() && !c.records.empty()) paths.push_back(c.records.string());
  if (paths.empty()) throw Error(ErrorCode::kConfig, "no records files given");
  if (!o.labels.empty() && o.labels.size() != paths.size()) {
    throw Error(ErrorCode::kConfig, "--label must be given once per records file");
  }
  std::vector<ReportRow> rows;
  json docs = json::array();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    require_path(paths[i], "records");
    std::ifstream in(paths[i], std::ios::binary);
    std::vector<EvalRecord> records;
    try {
      records = read_records(in);
    } catch (const Error& e) {
      throw Error(e.code(), paths[i] + ": " + e.what());
    }
    ReportRow row;
    row.dataset = c.dataset;
    row.method = records.empty() ? c.method : std::string(to_string(records.front().mode));
    if (!o.labels.empty()) {
      const std::string& label = o.labels[i];
      const auto slash = label.rfind('/');
      row.method = label.substr(0, slash);
      if (slash != std::string::npos) row.dataset = label.substr(slash + 1);
    }
    row.report = compute_report(records);
    docs.push_back({{"method", row.method}, {"dataset", row.dataset}, {"metrics", report_to_json(row.report)}});
    rows.push_back(std::move(row));
  }
  Outputs out_files(c.output_dir);
  json doc = provenance(c);
  doc["rows"] = docs;
  out_files.write("report.json", doc.dump(2) + "\n");
  out_files.write("report.md", render_markdown(rows));
  out_files.manifest("report", c, {{"rows", rows.size()}});
  out << render_markdown(rows);
  return kExitOk;
}

int cmd_grpo_demo(const RunConfig& c, std::ostream& out) {
  const grpo::SyntheticTask task = grpo::make_task(c.grpo.contexts, c.grpo.seed);
  const grpo::TrainResult result = grpo::train_toy(c.grpo, task);
  std::ostringstream csv;
  grpo::write_curve_csv(csv, result.curve);
  Outputs o(c.output_dir);
  o.write("curve.csv", csv.str());
  o.manifest("grpo-demo", c, {{"rows", result.curve.size()}});
  char line[128];
  std::snprintf(line, sizeof line, "mean reward %.4f -> %.4f over %zu steps (max 2.0)\n",
                result.curve.front().mean_reward, result.curve.back().mean_reward, c.grpo.steps);
  out << line;
  return kExitOk;
}

void add_common_inputs(CLI::App* sub, Overrides& o) {
  sub->add_option("--taxonomy", o.taxonomy, "Taxonomy CSV");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical taxonomic classification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));
  Overrides o;
  app.add_option("--config", o.config, "TOML config file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Root seed for every random stream");
  app.add_option("--output-dir", o.output_dir, "Directory for outputs and manifest.json");

  auto* build = app.add_subcommand("build-questions", "Build four-option questions per image and level");
  add_common_inputs(build, o);
  build->add_option("--embeddings", o.embeddings, "Label and image embeddings (JSONL)");
  build->add_option("--images", o.images, "CSV with image,leaf columns");
  build->add_option("--images-per-species", o.images_per_species, "Per-species image cap");
  build->add_option("--distractor-source", o.distractor_source, "image or label");
  build->add_option("--mode", o.mode, "open_set builds open questions; other modes build multiple choice");

  auto* split = app.add_subcommand("split", "Split species into disjoint SFT and RL halves");
  add_common_inputs(split, o);
  split->add_option("--images", o.images, "Optional image CSV to partition");

  auto* sft = app.add_subcommand("export-sft", "Export prompt/target pairs for supervised fine-tuning");
  add_common_inputs(sft, o);
  sft->add_option("--questions", o.questions, "questions.jsonl");
  sft->add_option("--sft-mode", o.sft_mode, "default or hierarchical");
  sft->add_option("--prompt-dir", o.prompt_dir, "Prompt template directory");

  auto* eval = app.add_subcommand("eval", "Run an evaluation and score it");
  add_common_inputs(eval, o);
  eval->add_option("--questions", o.questions, "questions.jsonl");
  eval->add_option("--fixtures", o.fixtures, "Mock fixtures (JSONL); omit to use the configured endpoint");
  eval->add_option("--mock", o.mock, "scripted or taxonomy");
  eval->add_option("--mode", o.mode, "Run mode");
  eval->add_option("--max-inflight", o.max_inflight, "Concurrent images");
  eval->add_option("--prompt-dir", o.prompt_dir, "Prompt template directory");
  eval->add_option("--method", o.method, "Row label in reports");
  eval->add_option("--dataset", o.dataset, "Column label in reports");

  auto* report = app.add_subcommand("report", "Render report tables from records files");
  report->add_option("records", o.records, "records.jsonl files");
  report->add_option("--label", o.labels, "METHOD/DATASET per records file; the last slash separates them");
  report->add_option("--dataset", o.dataset, "Dataset label when --label is absent");

  auto* demo = app.add_subcommand("grpo-demo", "Train the toy policy and write the reward curve");
  demo->add_option("--steps", o.steps, "Training steps");
  demo->add_option("--lr", o.learning_rate, "Learning rate");
  demo->add_option("--beta", o.beta, "KL coefficient");
  demo->add_option("--group-size", o.group_size, "Samples per group");
  demo->add_option("--clip-eps", o.clip_eps, "Clip range");
  demo->add_option("--contexts", o.contexts, "Query contexts");
  demo->add_option("--inner-steps", o.inner_steps, "Gradient steps per sampled batch");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig c = resolve_config(o);
    if (build->parsed()) return cmd_build_questions(c, out);
    if (split->parsed()) return cmd_split(c, out);
    if (sft->parsed()) return cmd_export_sft(c, out);
    if (eval->parsed()) return cmd_eval(c, out, err);
    if (report->parsed()) return cmd_report(c, o, out);
    if (demo->parsed()) return cmd_grpo_demo(c, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kDivergence ? kExitDivergence : kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace taxon::cli
