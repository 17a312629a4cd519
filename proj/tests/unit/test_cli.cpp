// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "world.hpp"

using namespace taxon;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "taxon");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("taxon_cli_" + name); }

std::vector<std::string> build_args(const testing::World& w, const fs::path& out) {
  return {"--output-dir", out.string(), "build-questions", "--taxonomy", w.taxonomy.string(),
          "--embeddings", w.embeddings.string(), "--images", w.images.string()};
}

}  // namespace

TEST_CASE("build-questions") {
  const auto w = testing::write_world(scratch("world"), {3, 12, 1});
  const fs::path out = scratch("build");
  const Result r = invoke(build_args(w, out));
  REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
  const auto qs = testing::read_question_file(out / "questions.jsonl");
  // 3 + min(12, 10) + 1 + 8 * 2 images, seven levels each.
  CHECK(qs.size() == (3 + 10 + 1 + 16) * 7);
  std::size_t prunus = 0;
  for (const auto& q : qs) prunus += q.leaf == "Prunus ilicifolia" && q.level == 0 ? 1 : 0;
  CHECK(prunus == 10);
  const auto manifest = load_json(out / "manifest.json");
  CHECK(manifest["command"] == "build-questions");
  CHECK(manifest["counts"]["images_in"] == 32);
  CHECK(manifest["counts"]["questions"] == qs.size());

  const std::string first = slurp(out / "questions.jsonl");
  REQUIRE(invoke(build_args(w, out)).code == cli::kExitOk);
  CHECK(slurp(out / "questions.jsonl") == first);
  CHECK(load_json(out / "manifest.json")["outputs"] == manifest["outputs"]);

  auto seeded = build_args(w, out);
  seeded.insert(seeded.begin(), {"--seed", "5"});
  REQUIRE(invoke(seeded).code == cli::kExitOk);
  CHECK(slurp(out / "questions.jsonl") != first);

  auto open = build_args(w, out);
  open.insert(open.end(), {"--mode", "open_set"});
  REQUIRE(invoke(open).code == cli::kExitOk);
  for (const auto& q : testing::read_question_file(out / "questions.jsonl")) CHECK(q.options.empty());
}

TEST_CASE("eval against the scripted mock") {
  const auto w = testing::write_world(scratch("world_eval"));
  const fs::path built = scratch("eval_build");
  REQUIRE(invoke(build_args(w, built)).code == cli::kExitOk);
  const auto qs = testing::read_question_file(built / "questions.jsonl");

  const fs::path fixtures = scratch("world_eval") / "fixtures.jsonl";
  const fs::path out = scratch("eval");
  auto eval_args = [&](std::vector<std::string> extra) {
    std::vector<std::string> a{"--output-dir", out.string(), "eval", "--taxonomy", w.taxonomy.string(),
                               "--questions", (built / "questions.jsonl").string(), "--fixtures", fixtures.string()};
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };

  SUBCASE("all correct") {
    testing::write_fixtures(fixtures, qs, "full_two_stage", [](const Question&) { return true; });
    const Result r = invoke(eval_args({"--method", "two-stage", "--dataset", "toy"}));
    REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
    CHECK(r.out.find("two-stage: n=22 hca=1.0000 acc_leaf=1.0000 failed=0") != std::string::npos);
    const auto report = load_json(out / "report.json");
    CHECK(report["metrics"]["hca"] == 1.0);
    CHECK(report["method"] == "two-stage");
    CHECK(report["prompts_version"] == "prompts-v1");
    CHECK(report["config_hash"].get<std::string>().size() == 16);
    CHECK(slurp(out / "report.md").find("| two-stage | 100.00 | 100.00 |") != std::string::npos);
    std::ifstream recs(out / "records.jsonl");
    CHECK(read_records(recs).size() == 22);
  }
  SUBCASE("wrong at one intermediate level for half the images") {
    std::size_t images_seen = 0;
    std::string last;
    testing::write_fixtures(fixtures, qs, "full_two_stage", [&](const Question& q) {
      if (q.image_ref != last) {
        last = q.image_ref;
        ++images_seen;
      }
      return !(images_seen % 2 == 0 && q.level == 3);
    });
    const Result r = invoke(eval_args({}));
    REQUIRE(r.code == cli::kExitOk);
    const auto m = load_json(out / "report.json")["metrics"];
    CHECK(m["hca"] == 0.5);
    CHECK(m["acc_leaf"] == 1.0);
    CHECK(m["hca_given_leaf"] == 0.5);
  }
  SUBCASE("leaf condition with the taxonomy-faithful mock") {
    testing::write_fixtures(fixtures, qs, "leaf_condition", [](const Question&) { return false; });
    const Result r = invoke(eval_args({"--mode", "leaf_condition", "--mock", "taxonomy"}));
    REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
    CHECK(load_json(out / "report.json")["metrics"]["hca_given_leaf"] == 1.0);
  }
  SUBCASE("missing fixtures fall back to UNKNOWN") {
    std::ofstream(fixtures) << "";
    const Result r = invoke(eval_args({}));
    REQUIRE(r.code == cli::kExitOk);
    CHECK(load_json(out / "report.json")["metrics"]["acc_leaf"] == 0.0);
  }
  SUBCASE("unreachable endpoint gives a partial run") {
    const fs::path cfg = scratch("world_eval") / "dead.toml";
    std::ofstream(cfg) << "[endpoint]\nurl = \"http://127.0.0.1:9/v1\"\nmax_attempts = 1\ntimeout_s = 1\n";
    const Result r = invoke({"--config", cfg.string(), "--output-dir", out.string(), "eval", "--taxonomy",
                             w.taxonomy.string(), "--questions", (built / "questions.jsonl").string()});
    CHECK(r.code == cli::kExitPartial);
    CHECK(r.err.find("partial run") != std::string::npos);
    CHECK(load_json(out / "report.json")["metrics"]["failed"] == 22);
  }
}

TEST_CASE("split and export") {
  const auto w = testing::write_world(scratch("world_split"));
  const fs::path out = scratch("split");
  const Result r = invoke({"--output-dir", out.string(), "split", "--taxonomy", w.taxonomy.string(), "--images",
                           w.images.string()});
  REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
  const auto split = load_json(out / "split.json");
  CHECK(split["sft"].size() == 6);
  CHECK(split["rl"].size() == 5);
  CHECK(slurp(out / "sft_images.csv").rfind("image,leaf\n", 0) == 0);

  REQUIRE(invoke(build_args(w, out)).code == cli::kExitOk);
  const Result e = invoke({"--output-dir", out.string(), "export-sft", "--taxonomy", w.taxonomy.string(),
                           "--questions", (out / "questions.jsonl").string(), "--sft-mode", "hierarchical"});
  REQUIRE_MESSAGE(e.code == cli::kExitOk, e.err);
  CHECK(e.out == "wrote 154 sft records\n");
}

TEST_CASE("report across records files") {
  const auto w = testing::write_world(scratch("world_report"));
  const fs::path built = scratch("report_build");
  REQUIRE(invoke(build_args(w, built)).code == cli::kExitOk);
  const auto qs = testing::read_question_file(built / "questions.jsonl");
  const fs::path fixtures = scratch("world_report") / "fixtures.jsonl";
  testing::write_fixtures(fixtures, qs, "full_two_stage", [](const Question& q) { return q.level != 6; });
  const fs::path run_dir = scratch("report_run");
  REQUIRE(invoke({"--output-dir", run_dir.string(), "eval", "--taxonomy", w.taxonomy.string(), "--questions",
                  (built / "questions.jsonl").string(), "--fixtures", fixtures.string()})
              .code == cli::kExitOk);
  const fs::path out = scratch("report");
  const std::string recs = (run_dir / "records.jsonl").string();
  const Result r = invoke({"--output-dir", out.string(), "report", recs, recs, "--label", "ours/plants", "--label",
                           "ours/birds"});
  REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
  CHECK(r.out.find("| ours | 0.00 | 0.00 | 0.00 | 0.00 |") != std::string::npos);
  CHECK(load_json(out / "report.json")["rows"].size() == 2);
  const Result slash = invoke({"--output-dir", out.string(), "report", recs, "--label", "w/o first stage/plants"});
  CHECK(slash.out.find("| w/o first stage | 0.00 |") != std::string::npos);
  CHECK(invoke({"--output-dir", out.string(), "report", recs, "--label", "a/b", "--label", "c/d"}).code ==
        cli::kExitConfig);
}

TEST_CASE("grpo-demo") {
  const fs::path out = scratch("grpo");
  const Result r = invoke({"--output-dir", out.string(), "grpo-demo", "--steps", "40"});
  REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
  CHECK(r.out.rfind("mean reward 0.7500 -> ", 0) == 0);
  const std::string curve = slurp(out / "curve.csv");
  REQUIRE(invoke({"--output-dir", out.string(), "grpo-demo", "--steps", "40"}).code == cli::kExitOk);
  CHECK(slurp(out / "curve.csv") == curve);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 42);

  REQUIRE(invoke({"--output-dir", out.string(), "grpo-demo", "--steps", "0"}).code == cli::kExitOk);
  const std::string idle = slurp(out / "curve.csv");
  CHECK(idle.rfind("step,mean_reward,mean_kl,objective\n0,0.75,0,", 0) == 0);
  CHECK(std::count(idle.begin(), idle.end(), '\n') == 2);

  const fs::path cfg = scratch("grpo") / "grpo.toml";
  std::ofstream(cfg) << "group_size = 8\nbeta = 0.4\nsteps = 5\n";
  const Result c = invoke({"--config", cfg.string(), "--output-dir", out.string(), "grpo-demo"});
  CHECK(c.out.find("over 5 steps") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(invoke({"--version"}).code == cli::kExitOk);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
  CHECK(invoke({"no-such-command"}).code == cli::kExitConfig);
  CHECK(invoke({"eval"}).code == cli::kExitConfig);
  CHECK(invoke({"grpo-demo", "--group-size", "1"}).code == cli::kExitConfig);
  CHECK(invoke({"eval", "--mode", "fastest"}).code == cli::kExitConfig);
  const fs::path cfg = scratch("bad") / "bad.toml";
  fs::create_directories(cfg.parent_path());
  std::ofstream(cfg) << "colour = 1\n";
  const Result bad = invoke({"--config", cfg.string(), "grpo-demo"});
  CHECK(bad.code == cli::kExitConfig);
  CHECK(bad.err.find("bad.toml:1: colour") != std::string::npos);
  const Result diverge = invoke({"--output-dir", scratch("div").string(), "grpo-demo", "--lr", "1e6", "--steps", "50"});
  CHECK(diverge.code == cli::kExitDivergence);
}
