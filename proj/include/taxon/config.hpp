// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "taxon/backend.hpp"
#include "taxon/dataset.hpp"
#include "taxon/grpo.hpp"
#include "taxon/orchestrator.hpp"

namespace taxon {

enum class MockKind {
  kScripted,  // fixture lookup only
  kTaxonomy,  // conditioned calls answered from the taxonomy, the rest from fixtures
};

std::string_view to_string(MockKind kind);
MockKind mock_kind_from_string(std::string_view name);

std::string_view to_string(DistractorSource source);
DistractorSource distractor_source_from_string(std::string_view name);

struct RunConfig {
  std::filesystem::path taxonomy;
  std::filesystem::path embeddings;
  std::filesystem::path images;  // CSV with columns image,leaf
  std::filesystem::path questions;
  std::filesystem::path records;
  std::filesystem::path fixtures;  // non-empty selects the mock backend
  std::filesystem::path prompt_dir;
  std::filesystem::path output_dir = "out";

  RunMode mode = RunMode::kFullTwoStage;
  std::uint64_t seed = 0;
  std::size_t max_inflight = 4;
  std::size_t images_per_species = 10;
  DistractorSource distractor_source = DistractorSource::kImageToLabel;
  SftMode sft_mode = SftMode::kDefault;
  MockKind mock = MockKind::kScripted;
  std::string method;          // report row label; defaults to the mode name
  std::string dataset = "dataset";

  EndpointConfig endpoint;
  grpo::GrpoConfig grpo;
};

/**
 * Parses TOML. Top-level keys hold paths and run settings; [endpoint] and
 * [grpo] hold backend and training settings. GRPO keys may also sit at the
 * top level so a bare grpo_config.toml parses. Relative paths resolve
 * against `base_dir`. Unknown keys and type mismatches throw Error(kConfig)
 * naming the source and line.
 */
RunConfig parse_config(std::string_view toml, const std::string& source_name,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// Every setting except the API key, in a fixed key order.
nlohmann::json config_to_json(const RunConfig& config);

// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string config_hash(const RunConfig& config);

std::string_view tool_version();

}  // namespace taxon
