// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <nlohmann/json.hpp>

#include "taxon/config.hpp"
#include "taxon/errors.hpp"

using namespace taxon;

namespace {

std::string config_error(std::string_view toml) {
  try {
    parse_config(toml, "run.toml");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

}  // namespace

TEST_CASE("full config") {
  const RunConfig c = parse_config(R"(
taxonomy = "data/taxonomy.csv"
fixtures = "/abs/fixtures.jsonl"
mode = "leaf_condition"
seed = 7
max_inflight = 2
distractor_source = "label"
sft_mode = "hierarchical"
mock = "taxonomy"
method = "two-stage"
dataset = "plants"

[endpoint]
url = "http://localhost:8000/v1"
model = "vlm"
temperature = 0.0
max_tokens = 512
max_attempts = 3
initial_backoff_ms = 100
max_backoff_ms = 400
timeout_s = 30

[grpo]
G = 4
epsilon = 0.1
kl_coeff = 0.2
lr = 0.5
steps = 10
)",
                                   "run.toml", "/base");
  CHECK(c.taxonomy == std::filesystem::path("/base/data/taxonomy.csv"));
  CHECK(c.fixtures == std::filesystem::path("/abs/fixtures.jsonl"));
  CHECK(c.mode == RunMode::kLeafCondition);
  CHECK(c.seed == 7);
  CHECK(c.max_inflight == 2);
  CHECK(c.endpoint.max_inflight == 2);
  CHECK(c.distractor_source == DistractorSource::kLabelToLabel);
  CHECK(c.sft_mode == SftMode::kHierarchical);
  CHECK(c.mock == MockKind::kTaxonomy);
  CHECK(c.method == "two-stage");
  CHECK(c.dataset == "plants");
  CHECK(c.endpoint.url == "http://localhost:8000/v1");
  CHECK(c.endpoint.max_tokens == 512);
  CHECK(c.endpoint.max_attempts == 3);
  CHECK(c.endpoint.initial_backoff == std::chrono::milliseconds(100));
  CHECK(c.endpoint.timeout == std::chrono::seconds(30));
  CHECK(c.grpo.group_size == 4);
  CHECK(c.grpo.clip_eps == 0.1);
  CHECK(c.grpo.beta == 0.2);
  CHECK(c.grpo.learning_rate == 0.5);
  CHECK(c.grpo.steps == 10);
  CHECK(c.grpo.seed == 7);
}

TEST_CASE("defaults and a bare training config") {
  const RunConfig d = parse_config("", "empty.toml");
  CHECK(d.mode == RunMode::kFullTwoStage);
  CHECK(d.endpoint.temperature == 0.0);
  CHECK(d.grpo.group_size == 8);
  CHECK(d.grpo.beta == 0.4);

  const RunConfig bare = parse_config("group_size = 8\nbeta = 0.4\nclip_eps = 0.2\nsteps = 300\n", "grpo.toml");
  CHECK(bare.grpo.steps == 300);

  const RunConfig pinned = parse_config("seed = 1\n[grpo]\nseed = 9\n", "s.toml");
  CHECK(pinned.seed == 1);
  CHECK(pinned.grpo.seed == 9);
}

TEST_CASE("config errors name the line") {
  CHECK(config_error("mode = \"full_two_stage\"\ncolour = 3\n").find("run.toml:2: colour") != std::string::npos);
  CHECK(config_error("[endpoint]\nurl = \"x\"\napi_key = \"sk\"\n").find("run.toml:3: api_key") != std::string::npos);
  CHECK(config_error("seed = \"seven\"\n").find("run.toml:1: seed") != std::string::npos);
  CHECK(config_error("mode = \"fast\"\n").find("run.toml:1: mode") != std::string::npos);
  CHECK(config_error("[grpo]\nwarmup = 1\n").find("run.toml:2: warmup") != std::string::npos);
  CHECK(config_error("max_inflight = 0\n").find("max_inflight") != std::string::npos);
  CHECK(config_error("seed = -1\n").find("non-negative") != std::string::npos);
  CHECK(config_error("group_size = 1\n").find("group_size") != std::string::npos);
  CHECK(config_error("this is not toml").find("run.toml:1") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/run.toml"), Error);
}

TEST_CASE("canonical json and hash") {
  const RunConfig a = parse_config("seed = 3\n[endpoint]\nurl = \"http://h\"\n", "a.toml");
  RunConfig b = a;
  b.endpoint.api_key = "secret";
  const auto j = config_to_json(b);
  CHECK(j.dump().find("secret") == std::string::npos);
  CHECK(j["seed"] == 3);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 4;
  CHECK(config_hash(a) != config_hash(b));
  CHECK_FALSE(tool_version().empty());
}
