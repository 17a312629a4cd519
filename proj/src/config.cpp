// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "taxon/errors.hpp"
#include "taxon/rng.hpp"

#ifndef TAXON_VERSION
#define TAXON_VERSION "0.0.0"
#endif

namespace taxon {

std::string_view tool_version() { return TAXON_VERSION; }

std::string_view to_string(MockKind kind) { return kind == MockKind::kScripted ? "scripted" : "taxonomy"; }

MockKind mock_kind_from_string(std::string_view name) {
  if (name == "scripted") return MockKind::kScripted;
  if (name == "taxonomy") return MockKind::kTaxonomy;
  throw Error(ErrorCode::kConfig, "unknown mock kind '" + std::string(name) + "'");
}

std::string_view to_string(DistractorSource source) {
  return source == DistractorSource::kImageToLabel ? "image" : "label";
}

DistractorSource distractor_source_from_string(std::string_view name) {
  if (name == "image") return DistractorSource::kImageToLabel;
  if (name == "label") return DistractorSource::kLabelToLabel;
  throw Error(ErrorCode::kConfig, "unknown distractor source '" + std::string(name) + "'");
}

namespace {

class Reader {
 public:
  Reader(std::string source, std::filesystem::path base) : source_(std::move(source)), base_(std::move(base)) {}

  [[noreturn]] void fail(const toml::node& node, const std::string& key, const std::string& what) const {
    const auto line = node.source().begin.line;
    throw Error(ErrorCode::kConfig, source_ + ":" + std::to_string(line) + ": " + key + ": " + what);
  }

  std::string str(const toml::node& n, const std::string& key) const {
    if (const auto* s = n.as_string()) return s->get();
    fail(n, key, "expected a string");
  }

  std::filesystem::path path(const toml::node& n, const std::string& key) const {
    std::filesystem::path p = str(n, key);
    if (p.empty() || p.is_absolute() || base_.empty()) return p;
    return base_ / p;
  }

  std::int64_t integer(const toml::node& n, const std::string& key) const {
    if (const auto* i = n.as_integer()) return i->get();
    fail(n, key, "expected an integer");
  }

  std::size_t count(const toml::node& n, const std::string& key) const {
    const auto v = integer(n, key);
    if (v < 0) fail(n, key, "must be non-negative");
    return static_cast<std::size_t>(v);
  }

  double real(const toml::node& n, const std::string& key) const {
    if (const auto* f = n.as_floating_point()) return f->get();
    if (const auto* i = n.as_integer()) return static_cast<double>(i->get());
    fail(n, key, "expected a number");
  }

  // Wraps enum parsers so their errors carry the line.
  template <typename F>
  auto parse_enum(const toml::node& n, const std::string& key, F&& f) const {
    const std::string s = str(n, key);
    try {
      return f(s);
    } catch (const Error& e) {
      fail(n, key, e.what());
    }
  }

 private:
  std::string source_;
  std::filesystem::path base_;
};

bool read_grpo_key(const Reader& r, const std::string& key, const toml::node& v, grpo::GrpoConfig& g) {
  if (key == "group_size" || key == "G") {
    g.group_size = r.count(v, key);
  } else if (key == "clip_eps" || key == "epsilon") {
    g.clip_eps = r.real(v, key);
  } else if (key == "beta" || key == "kl_coeff") {
    g.beta = r.real(v, key);
  } else if (key == "std_floor") {
    g.std_floor = r.real(v, key);
  } else if (key == "learning_rate" || key == "lr") {
    g.learning_rate = r.real(v, key);
  } else if (key == "steps") {
    g.steps = r.count(v, key);
  } else if (key == "contexts") {
    g.contexts = r.count(v, key);
  } else if (key == "inner_steps") {
    g.inner_steps = r.count(v, key);
  } else if (key == "seed") {
    g.seed = static_cast<std::uint64_t>(r.count(v, key));
  } else {
    return false;
  }
  return true;
}

void read_endpoint(const Reader& r, const toml::table& t, EndpointConfig& e) {
  for (auto&& [k, v] : t) {
    const std::string key(k.str());
    if (key == "url") {
      e.url = r.str(v, key);
    } else if (key == "model") {
      e.model = r.str(v, key);
    } else if (key == "temperature") {
      e.temperature = r.real(v, key);
    } else if (key == "max_tokens") {
      e.max_tokens = static_cast<int>(r.count(v, key));
    } else if (key == "max_attempts") {
      e.max_attempts = static_cast<int>(r.count(v, key));
    } else if (key == "initial_backoff_ms") {
      e.initial_backoff = std::chrono::milliseconds(r.count(v, key));
    } else if (key == "max_backoff_ms") {
      e.max_backoff = std::chrono::milliseconds(r.count(v, key));
    } else if (key == "timeout_s") {
      e.timeout = std::chrono::seconds(r.count(v, key));
    } else if (key == "image_root") {
      e.image_root = r.path(v, key);
    } else if (key == "api_key") {
      r.fail(v, key, "keys are read from TAXON_API_KEY, not from config files");
    } else {
      r.fail(v, key, "unknown endpoint key");
    }
  }
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source_name, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::kConfig, source_name + ":" + std::to_string(e.source().begin.line) + ": " +
                                        std::string(e.description()));
  }
  const Reader r(source_name, base_dir);
  RunConfig c;
  bool seed_set = false;
  bool grpo_seed_set = false;
  for (auto&& [k, v] : root) {
    const std::string key(k.str());
    if (key == "taxonomy") {
      c.taxonomy = r.path(v, key);
    } else if (key == "embeddings") {
      c.embeddings = r.path(v, key);
    } else if (key == "images") {
      c.images = r.path(v, key);
    } else if (key == "questions") {
      c.questions = r.path(v, key);
    } else if (key == "records") {
      c.records = r.path(v, key);
    } else if (key == "fixtures") {
      c.fixtures = r.path(v, key);
    } else if (key == "prompt_dir") {
      c.prompt_dir = r.path(v, key);
    } else if (key == "output_dir") {
      c.output_dir = r.path(v, key);
    } else if (key == "mode") {
      c.mode = r.parse_enum(v, key, run_mode_from_string);
    } else if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(r.count(v, key));
      seed_set = true;
    } else if (key == "max_inflight") {
      c.max_inflight = r.count(v, key);
      if (c.max_inflight == 0) r.fail(v, key, "must be at least 1");
    } else if (key == "images_per_species") {
      c.images_per_species = r.count(v, key);
      if (c.images_per_species == 0) r.fail(v, key, "must be at least 1");
    } else if (key == "distractor_source") {
      c.distractor_source = r.parse_enum(v, key, distractor_source_from_string);
    } else if (key == "sft_mode") {
      c.sft_mode = r.parse_enum(v, key, sft_mode_from_string);
    } else if (key == "mock") {
      c.mock = r.parse_enum(v, key, mock_kind_from_string);
    } else if (key == "method") {
      c.method = r.str(v, key);
    } else if (key == "dataset") {
      c.dataset = r.str(v, key);
    } else if (key == "endpoint") {
      const auto* t = v.as_table();
      if (!t) r.fail(v, key, "expected a table");
      read_endpoint(r, *t, c.endpoint);
    } else if (key == "grpo") {
      const auto* t = v.as_table();
      if (!t) r.fail(v, key, "expected a table");
      for (auto&& [gk, gv] : *t) {
        const std::string gkey(gk.str());
        if (!read_grpo_key(r, gkey, gv, c.grpo)) r.fail(gv, gkey, "unknown grpo key");
        if (gkey == "seed") grpo_seed_set = true;
      }
    } else if (!read_grpo_key(r, key, v, c.grpo)) {
      r.fail(v, key, "unknown key");
    }
  }
  // A single root seed feeds every stream unless [grpo] pins its own.
  if (seed_set && !grpo_seed_set) c.grpo.seed = c.seed;
  c.endpoint.max_inflight = c.max_inflight;
  try {
    c.grpo.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, source_name + ": " + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), path.parent_path());
}

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["taxonomy"] = c.taxonomy.generic_string();
  j["embeddings"] = c.embeddings.generic_string();
  j["images"] = c.images.generic_string();
  j["questions"] = c.questions.generic_string();
  j["records"] = c.records.generic_string();
  j["fixtures"] = c.fixtures.generic_string();
  j["prompt_dir"] = c.prompt_dir.generic_string();
  j["output_dir"] = c.output_dir.generic_string();
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["max_inflight"] = c.max_inflight;
  j["images_per_species"] = c.images_per_species;
  j["distractor_source"] = to_string(c.distractor_source);
  j["sft_mode"] = to_string(c.sft_mode);
  j["mock"] = to_string(c.mock);
  j["method"] = c.method;
  j["dataset"] = c.dataset;
  j["endpoint"] = {
      {"url", c.endpoint.url},
      {"model", c.endpoint.model},
      {"temperature", c.endpoint.temperature},
      {"max_tokens", c.endpoint.max_tokens},
      {"max_attempts", c.endpoint.max_attempts},
      {"initial_backoff_ms", c.endpoint.initial_backoff.count()},
      {"max_backoff_ms", c.endpoint.max_backoff.count()},
      {"timeout_s", c.endpoint.timeout.count()},
      {"image_root", c.endpoint.image_root.generic_string()},
  };
  j["grpo"] = {
      {"group_size", c.grpo.group_size}, {"clip_eps", c.grpo.clip_eps},
      {"beta", c.grpo.beta},             {"std_floor", c.grpo.std_floor},
      {"learning_rate", c.grpo.learning_rate}, {"steps", c.grpo.steps},
      {"seed", c.grpo.seed},             {"contexts", c.grpo.contexts},
      {"inner_steps", c.grpo.inner_steps},
  };
  return j;
}

std::string config_hash(const RunConfig& config) {
  const std::string canonical = config_to_json(config).dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

}  // namespace taxon
