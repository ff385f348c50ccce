// Copyright 2026 The ConStruM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace construm {

enum class CallRole { kTreeSummary, kRelation, kDifferentiation, kDecision };

std::string_view to_string(CallRole role) noexcept;
CallRole parse_call_role(std::string_view s);

using Seconds = std::chrono::duration<double>;

struct ChatCall {
  CallRole role = CallRole::kDecision;
  std::string prompt;
  Seconds timeout{90.0};
  int max_retries = 1;
};

struct ChatReply {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  double latency_s = 0.0;
  bool cache_hit = false;

  std::int64_t total_tokens() const noexcept { return prompt_tokens + completion_tokens; }
};

// Unit-normalized vector; `norm` is the L2 norm before normalization.
struct EmbeddingVector {
  std::vector<double> values;
  double norm = 1.0;
};

EmbeddingVector normalize_embedding(std::vector<double> raw);
// Dot product of two unit vectors.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// ---------------------------------------------------------------------------
// Backends

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Part of every cache key; must change whenever replies could change.
  virtual std::string id() const = 0;
  virtual ChatReply complete(const ChatCall& call) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string id() const = 0;
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

// Rule-based offline backend. A reply depends only on the prompt and the script.
//
// Script JSON:
//   {"id": "...",
//    "rules": [{"role": "decision", "all": ["a", "b"], "none": ["c"], "reply": "..."},
//              {"contains": "MARK:G1", "reply": "ANSWER: C12"}],
//    "defaults": {"tree_summary": "...", "relation": "", ...}}
// Rules are tried in order; the first whose role matches (if given), whose
// `all`/`contains` substrings are all present and whose `none` substrings are
// all absent wins. Otherwise the role default applies, else ScriptMissError.
class ScriptedChatBackend final : public ChatBackend {
 public:
  struct Rule {
    std::optional<CallRole> role;
    std::vector<std::string> all;
    std::vector<std::string> none;
    std::string reply;
  };

  explicit ScriptedChatBackend(const nlohmann::json& script);
  static std::shared_ptr<ScriptedChatBackend> from_file(const std::filesystem::path& path);

  std::string id() const override { return id_; }
  ChatReply complete(const ChatCall& call) override;

  // The reply text for a prompt without accounting; throws ScriptMissError.
  std::string reply_for(CallRole role, std::string_view prompt) const;

 private:
  std::string id_;
  std::vector<Rule> rules_;
  std::map<CallRole, std::string> defaults_;
};

// Wraps a callable; used for tests and for embedding the engine elsewhere.
class FunctionChatBackend final : public ChatBackend {
 public:
  using Fn = std::function<std::string(const ChatCall&)>;
  FunctionChatBackend(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  ChatReply complete(const ChatCall& call) override;

 private:
  std::string id_;
  Fn fn_;
};

// Seeded hashing of lower-cased whitespace tokens into a fixed-size bag.
// Shared tokens raise cosine monotonically; no model needed.
class HashEmbedder final : public EmbeddingBackend {
 public:
  explicit HashEmbedder(std::size_t dimension = 64, std::uint64_t seed = 17);
  std::string id() const override;
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  std::vector<double> embed_one(std::string_view text) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

class FunctionEmbeddingBackend final : public EmbeddingBackend {
 public:
  using Fn = std::function<std::vector<double>(const std::string&)>;
  FunctionEmbeddingBackend(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  std::string id_;
  Fn fn_;
};

struct HttpEndpoint {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string chat_model = "gpt-5";
  std::string embedding_model = "text-embedding-3-small";
  // Merged verbatim into every chat request body (decoding parameters).
  nlohmann::json decoding = nlohmann::json::object();
};

// Chat-completions style HTTP backend.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpEndpoint endpoint);
  std::string id() const override;
  ChatReply complete(const ChatCall& call) override;

 private:
  HttpEndpoint endpoint_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(HttpEndpoint endpoint, Seconds timeout = Seconds{60.0});
  std::string id() const override;
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  HttpEndpoint endpoint_;
  Seconds timeout_;
};

// ---------------------------------------------------------------------------
// Accounting and caching

struct Usage {
  std::int64_t calls = 0;  // complete() invocations, cache hits included
  std::int64_t cache_hits = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  std::int64_t total_tokens() const noexcept { return prompt_tokens + completion_tokens; }
};

// Per-caller tally; attach to complete() to attribute calls to one query.
class UsageMeter {
 public:
  void record(const ChatReply& reply) noexcept;
  Usage snapshot() const noexcept;

 private:
  std::atomic<std::int64_t> calls_{0};
  std::atomic<std::int64_t> cache_hits_{0};
  std::atomic<std::int64_t> prompt_tokens_{0};
  std::atomic<std::int64_t> completion_tokens_{0};
};

struct CachedReply {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

// Content-addressed reply store: memory map plus an optional append-only
// directory of <key>.json records written via temp file + rename.
class ReplyCache {
 public:
  explicit ReplyCache(std::optional<std::filesystem::path> directory = std::nullopt);

  std::optional<CachedReply> lookup(const std::string& key);
  void store(const std::string& key, const CachedReply& reply, std::string_view backend_id,
             CallRole role);
  std::size_t memory_size() const;

 private:
  std::optional<std::filesystem::path> directory_;
  mutable std::mutex mutex_;
  std::map<std::string, CachedReply> memory_;
};

struct AttemptRecord {
  CallRole role;
  std::string key;
  enum class Outcome { kOk, kTimeout, kTransport, kScriptMiss, kOther } outcome;
};

struct GatewayOptions {
  bool cache = true;
  std::optional<std::filesystem::path> cache_dir;
};

// Shared entry point for all model traffic. Thread-safe.
class ModelGateway {
 public:
  ModelGateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedder,
               GatewayOptions options = {});

  ChatReply complete(const ChatCall& call, UsageMeter* meter = nullptr);
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);

  Usage usage() const noexcept;
  std::vector<AttemptRecord> attempt_log() const;
  std::string cache_key(const ChatCall& call) const;

  const std::string& chat_backend_id() const noexcept { return chat_id_; }
  const std::string& embedding_backend_id() const noexcept { return embed_id_; }

 private:
  ChatReply call_backend(const ChatCall& call, const std::string& key);
  void account(const ChatReply& reply, UsageMeter* meter) noexcept;

  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbeddingBackend> embedder_;
  std::string chat_id_;
  std::string embed_id_;
  GatewayOptions options_;
  ReplyCache cache_;

  std::mutex inflight_mutex_;
  std::map<std::string, std::shared_future<ChatReply>> inflight_;

  mutable std::mutex log_mutex_;
  std::vector<AttemptRecord> attempts_;

  std::mutex embed_mutex_;
  std::map<std::string, EmbeddingVector, std::less<>> embed_cache_;

  UsageMeter totals_;
};

}  // namespace construm
