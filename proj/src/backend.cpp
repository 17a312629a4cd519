// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "taxon/errors.hpp"
#include "taxon/response.hpp"
#include "taxon/text.hpp"

namespace taxon {

// ---------------------------------------------------------------------------
// ScriptedMock

ScriptedMock ScriptedMock::load(std::istream& in) {
  ScriptedMock mock;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FixtureKey key{j.at("image").get<std::string>(), j.at("stage").get<int>(), j.at("mode").get<std::string>(),
                     std::nullopt};
      if (j.contains("level") && !j.at("level").is_null()) key.level = j.at("level").get<std::size_t>();
      mock.add(std::move(key), j.at("response").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return mock;
}

ScriptedMock ScriptedMock::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open fixtures file " + path.string());
  try {
    return load(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void ScriptedMock::add(FixtureKey key, std::string response) {
  const std::string desc = key.image + "/stage" + std::to_string(key.stage) + "/" + key.mode;
  if (!fixtures_.emplace(std::move(key), std::move(response)).second) {
    throw Error(ErrorCode::kDuplicateKey, "duplicate fixture " + desc);
  }
}

std::string_view ScriptedMock::lookup(const CallContext& context) const {
  FixtureKey key{context.image_ref, context.stage, context.mode, context.level};
  if (auto it = fixtures_.find(key); it != fixtures_.end()) return it->second;
  if (key.level) {
    key.level.reset();
    if (auto it = fixtures_.find(key); it != fixtures_.end()) return it->second;
  }
  return kFallbackResponse;
}

Completion ScriptedMock::complete(std::span<const Message>, const CallContext& context) {
  const std::string_view text = lookup(context);
  return Completion{std::string(text), text::count_whitespace_tokens(text), 1};
}

// ---------------------------------------------------------------------------
// TaxonomyFaithfulMock

TaxonomyFaithfulMock::TaxonomyFaithfulMock(std::shared_ptr<const Taxonomy> taxonomy, ScriptedMock unconditioned)
    : taxonomy_(std::move(taxonomy)), unconditioned_(std::move(unconditioned)) {}

std::string TaxonomyFaithfulMock::answer_for(const CallContext& context) const {
  std::vector<std::string> path;
  try {
    path = taxonomy_->ancestor_path(*context.conditioned_leaf);
  } catch (const Error&) {
    return serialize_tagged("", kUnknownLabel);
  }
  std::string chain;
  for (const auto& label : path) chain += (chain.empty() ? "" : " -> ") + label;

  if (!context.level) {
    std::string listing;
    for (const auto& label : path) listing += (listing.empty() ? "" : "\n") + label;
    return serialize_tagged(chain, listing);
  }
  if (*context.level >= path.size()) return serialize_tagged(chain, kUnknownLabel);
  const std::string& label = path[*context.level];
  if (context.options.empty()) return serialize_tagged(chain, label);
  for (const auto& o : context.options) {
    if (o.label == label) return serialize_tagged(chain, std::string(1, o.letter));
  }
  return serialize_tagged(chain, kUnknownLabel);
}

Completion TaxonomyFaithfulMock::complete(std::span<const Message> messages, const CallContext& context) {
  if (!context.conditioned_leaf) return unconditioned_.complete(messages, context);
  std::string text = answer_for(context);
  const std::size_t tokens = text::count_whitespace_tokens(text);
  return Completion{std::move(text), tokens, 1};
}

// ---------------------------------------------------------------------------
// HTTP

std::string api_key_from_env() {
  const char* key = std::getenv("TAXON_API_KEY");
  return key ? std::string(key) : std::string();
}

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

nlohmann::json build_chat_request(const EndpointConfig& config, std::span<const Message> messages,
                                  const std::string& image_url) {
  nlohmann::json msgs = nlohmann::json::array();
  bool image_attached = false;
  for (const auto& m : messages) {
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", m.text}});
    if (m.role == "user" && !image_attached && !image_url.empty()) {
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", image_url}}}});
      image_attached = true;
    }
    msgs.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  return nlohmann::json{{"model", config.model},
                        {"messages", std::move(msgs)},
                        {"temperature", config.temperature},
                        {"max_tokens", config.max_tokens}};
}

Completion parse_chat_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error(ErrorCode::kProtocol, "response has no choices");
  }
  const auto& message = j["choices"][0].value("message", nlohmann::json::object());
  if (!message.contains("content")) throw Error(ErrorCode::kProtocol, "choice has no message content");
  const auto& content = message["content"];
  Completion c;
  if (content.is_string()) {
    c.text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text") c.text += part.value("text", "");
    }
  } else {
    throw Error(ErrorCode::kProtocol, "message content is neither text nor parts");
  }
  const auto usage = j.find("usage");
  if (usage != j.end() && usage->is_object() && usage->contains("completion_tokens") &&
      (*usage)["completion_tokens"].is_number_integer()) {
    c.tokens = (*usage)["completion_tokens"].get<std::size_t>();
  } else {
    c.tokens = text::count_whitespace_tokens(c.text);
  }
  return c;
}

HttpBackend::HttpBackend(EndpointConfig config, std::shared_ptr<Transport> transport, Logger log, Sleeper sleep)
    : config_(std::move(config)), transport_(std::move(transport)), log_(std::move(log)), sleep_(std::move(sleep)) {
  if (config_.url.empty()) throw Error(ErrorCode::kConfig, "endpoint URL is empty");
  if (config_.max_attempts < 1) throw Error(ErrorCode::kConfig, "max_attempts must be at least 1");
  if (config_.max_inflight < 1) throw Error(ErrorCode::kConfig, "max_inflight must be at least 1");
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpBackend::image_url(const std::string& image_ref) const {
  if (image_ref.starts_with("data:") || image_ref.starts_with("http://") || image_ref.starts_with("https://")) {
    return image_ref;
  }
  const std::filesystem::path path = config_.image_root.empty() ? std::filesystem::path(image_ref)
                                                                : config_.image_root / image_ref;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "image not found: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string ext = text::ascii_lower(path.extension().string());
  std::string mime = "image/jpeg";
  if (ext == ".png") mime = "image/png";
  else if (ext == ".webp") mime = "image/webp";
  else if (ext == ".gif") mime = "image/gif";
  return "data:" + mime + ";base64," + base64_encode(buf.str());
}

Completion HttpBackend::complete(std::span<const Message> messages, const CallContext& context) {
  HttpRequest request;
  request.url = config_.url;
  while (!request.url.empty() && request.url.back() == '/') request.url.pop_back();
  request.url += "/chat/completions";
  request.headers.emplace_back("Content-Type", "application/json");
  if (!config_.api_key.empty()) request.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
  request.body = build_chat_request(config_, messages, image_url(context.image_ref)).dump();

  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < config_.max_inflight; });
  ++in_flight_;
  lock.unlock();
  struct Release {
    HttpBackend* self;
    ~Release() {
      {
        std::lock_guard g(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } release{this};
  return send_with_retry(request);
}

Completion HttpBackend::send_with_retry(const HttpRequest& request) {
  std::chrono::milliseconds backoff = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    try {
      const HttpResponse response = transport_->post(request);
      if (response.status >= 200 && response.status < 300) {
        Completion c = parse_chat_response(response.body);
        c.attempts = attempt;
        if (log_ && attempt > 1) log_("request succeeded after " + std::to_string(attempt) + " attempts");
        return c;
      }
      if (response.status == 401 || response.status == 403) {
        throw Error(ErrorCode::kAuthRejected, "endpoint returned HTTP " + std::to_string(response.status));
      }
      const bool retryable = response.status == 408 || response.status == 429 || response.status >= 500;
      if (!retryable) {
        throw Error(ErrorCode::kProtocol, "endpoint returned HTTP " + std::to_string(response.status) + ": " +
                                              response.body.substr(0, 200));
      }
      last_error = "HTTP " + std::to_string(response.status);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransport) throw;
      last_error = e.what();
    }
    if (log_) log_("attempt " + std::to_string(attempt) + " failed: " + last_error);
    if (attempt < config_.max_attempts) {
      sleep_(backoff);
      backoff = std::min(backoff * 2, config_.max_backoff);
    }
  }
  throw Error(ErrorCode::kTransport,
              "giving up after " + std::to_string(config_.max_attempts) + " attempts: " + last_error);
}

}  // namespace taxon
