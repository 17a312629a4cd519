// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <compare>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "taxon/dataset.hpp"
#include "taxon/taxonomy.hpp"

namespace taxon {

struct Message {
  std::string role;
  std::string text;
};

// Structured description of a call. Network backends only use image_ref;
// mock backends key their responses on the rest.
struct CallContext {
  std::string image_ref;
  int stage = 1;
  std::string mode;
  std::optional<std::size_t> level;
  std::optional<std::string> conditioned_leaf;
  std::vector<Option> options;
};

struct Completion {
  std::string text;
  std::size_t tokens = 0;
  int attempts = 1;
};

// Must be safe to call from several threads at once.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual Completion complete(std::span<const Message> messages, const CallContext& context) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

inline constexpr std::string_view kFallbackResponse = "<think></think><answer>UNKNOWN</answer>";

struct FixtureKey {
  std::string image;
  int stage = 1;
  std::string mode;
  std::optional<std::size_t> level;

  auto operator<=>(const FixtureKey&) const = default;
};

/**
 * Pure lookup backend over fixtures.jsonl records
 * {"image", "stage", "mode", "response"} with an optional "level" that
 * targets one stage-2 question. A level-specific entry wins over a
 * level-less one; a miss returns kFallbackResponse.
 */
class ScriptedMock : public ModelBackend {
 public:
  ScriptedMock() = default;
  explicit ScriptedMock(std::map<FixtureKey, std::string> fixtures) : fixtures_(std::move(fixtures)) {}

  static ScriptedMock load(std::istream& in);
  static ScriptedMock load_file(const std::filesystem::path& path);

  void add(FixtureKey key, std::string response);
  std::size_t size() const { return fixtures_.size(); }

  std::string_view lookup(const CallContext& context) const;
  Completion complete(std::span<const Message> messages, const CallContext& context) override;

 private:
  std::map<FixtureKey, std::string> fixtures_;
};

/**
 * Mock whose answers downstream of a leaf condition are always consistent
 * with the taxonomy: stage-2 questions are answered with the ancestor of the
 * conditioned leaf, leaf-conditioned listings with that leaf's path. Calls
 * without a condition (stage 1, direct listings, unconditioned questions)
 * are delegated to the scripted fixtures.
 */
class TaxonomyFaithfulMock : public ModelBackend {
 public:
  TaxonomyFaithfulMock(std::shared_ptr<const Taxonomy> taxonomy, ScriptedMock unconditioned);

  Completion complete(std::span<const Message> messages, const CallContext& context) override;

 private:
  std::string answer_for(const CallContext& context) const;

  std::shared_ptr<const Taxonomy> taxonomy_;
  ScriptedMock unconditioned_;
};

// ---------------------------------------------------------------------------
// Chat-completions endpoint

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Connection-level failures throw Error(kTransport); HTTP statuses are returned.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

std::shared_ptr<Transport> make_http_transport(std::chrono::seconds timeout);

struct EndpointConfig {
  std::string url;  // base URL; requests go to {url}/chat/completions
  std::string model;
  std::string api_key;
  double temperature = 0.0;
  int max_tokens = 1024;
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
  std::chrono::seconds timeout{120};
  std::size_t max_inflight = 4;
  std::filesystem::path image_root;
};

// Reads TAXON_API_KEY; empty when unset.
std::string api_key_from_env();

std::string base64_encode(std::string_view bytes);

nlohmann::json build_chat_request(const EndpointConfig& config, std::span<const Message> messages,
                                  const std::string& image_url);

// Throws Error(kProtocol) when the body is not a usable chat completion.
Completion parse_chat_response(std::string_view body);

class HttpBackend : public ModelBackend {
 public:
  using Logger = std::function<void(std::string_view)>;
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpBackend(EndpointConfig config, std::shared_ptr<Transport> transport, Logger log = {}, Sleeper sleep = {});

  Completion complete(std::span<const Message> messages, const CallContext& context) override;

  // data: URL for a local image, or the reference itself when already a URL.
  std::string image_url(const std::string& image_ref) const;

 private:
  Completion send_with_retry(const HttpRequest& request);

  EndpointConfig config_;
  std::shared_ptr<Transport> transport_;
  Logger log_;
  Sleeper sleep_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
};

}  // namespace taxon
