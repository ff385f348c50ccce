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

#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "construm/error.hpp"
#include "construm/gateway.hpp"
#include "construm/text.hpp"

namespace construm {

std::string_view to_string(CallRole role) noexcept {
  switch (role) {
    case CallRole::kTreeSummary: return "tree_summary";
    case CallRole::kRelation: return "relation";
    case CallRole::kDifferentiation: return "differentiation";
    case CallRole::kDecision: return "decision";
  }
  return "decision";
}

CallRole parse_call_role(std::string_view s) {
  if (s == "tree_summary") return CallRole::kTreeSummary;
  if (s == "relation") return CallRole::kRelation;
  if (s == "differentiation") return CallRole::kDifferentiation;
  if (s == "decision") return CallRole::kDecision;
  throw ParseError("role", "unknown call role \"" + std::string(s) + "\"");
}

EmbeddingVector normalize_embedding(std::vector<double> raw) {
  double sq = 0.0;
  for (double v : raw) sq += v * v;
  double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw GatewayError("embedding has zero or non-finite norm");
  for (double& v : raw) v /= norm;
  return EmbeddingVector{std::move(raw), norm};
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) throw GatewayError("embedding dimension mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return dot;
}

ChatReply FunctionChatBackend::complete(const ChatCall& call) {
  ChatReply reply;
  reply.text = fn_(call);
  reply.prompt_tokens = text::count_tokens(call.prompt);
  reply.completion_tokens = text::count_tokens(reply.text);
  return reply;
}

std::vector<std::vector<double>> FunctionEmbeddingBackend::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(fn_(t));
  return out;
}

// ---------------------------------------------------------------------------

void UsageMeter::record(const ChatReply& reply) noexcept {
  calls_.fetch_add(1, std::memory_order_relaxed);
  if (reply.cache_hit) {
    cache_hits_.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  prompt_tokens_.fetch_add(reply.prompt_tokens, std::memory_order_relaxed);
  completion_tokens_.fetch_add(reply.completion_tokens, std::memory_order_relaxed);
}

Usage UsageMeter::snapshot() const noexcept {
  return Usage{calls_.load(), cache_hits_.load(), prompt_tokens_.load(), completion_tokens_.load()};
}

// ---------------------------------------------------------------------------

ModelGateway::ModelGateway(std::shared_ptr<ChatBackend> chat,
                           std::shared_ptr<EmbeddingBackend> embedder, GatewayOptions options)
    : chat_(std::move(chat)),
      embedder_(std::move(embedder)),
      chat_id_(chat_ ? chat_->id() : std::string("none")),
      embed_id_(embedder_ ? embedder_->id() : std::string("none")),
      options_(std::move(options)),
      cache_(options_.cache ? options_.cache_dir : std::nullopt) {}

std::string ModelGateway::cache_key(const ChatCall& call) const {
  std::string material = chat_id_;
  material += '\n';
  material += to_string(call.role);
  material += '\n';
  material += call.prompt;
  return text::sha256_hex(material);
}

Usage ModelGateway::usage() const noexcept { return totals_.snapshot(); }

std::vector<AttemptRecord> ModelGateway::attempt_log() const {
  std::lock_guard lock(log_mutex_);
  return attempts_;
}

void ModelGateway::account(const ChatReply& reply, UsageMeter* meter) noexcept {
  totals_.record(reply);
  if (meter) meter->record(reply);
}

namespace {

// Runs the backend on a detached thread so a hung call cannot outlive its
// timeout; a late result is dropped.
ChatReply run_with_deadline(const std::shared_ptr<ChatBackend>& backend, const ChatCall& call) {
  auto promise = std::make_shared<std::promise<ChatReply>>();
  auto future = promise->get_future();
  std::thread([backend, call, promise] {
    try {
      promise->set_value(backend->complete(call));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  }).detach();
  if (future.wait_for(call.timeout) != std::future_status::ready) {
    throw TimeoutError("call timed out after " + std::to_string(call.timeout.count()) + "s", 1);
  }
  return future.get();
}

}  // namespace

ChatReply ModelGateway::call_backend(const ChatCall& call, const std::string& key) {
  if (!chat_) throw GatewayError("no chat backend configured");
  const int attempts = 1 + std::max(0, call.max_retries);
  std::string last_error;
  bool last_was_timeout = false;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto outcome = AttemptRecord::Outcome::kOk;
    try {
      auto start = std::chrono::steady_clock::now();
      ChatReply reply = run_with_deadline(chat_, call);
      if (text::trim(reply.text).empty()) throw TransportError("empty reply from backend");
      reply.latency_s = Seconds(std::chrono::steady_clock::now() - start).count();
      reply.cache_hit = false;
      std::lock_guard lock(log_mutex_);
      attempts_.push_back({call.role, key, outcome});
      return reply;
    } catch (const TimeoutError& e) {
      outcome = AttemptRecord::Outcome::kTimeout;
      last_error = e.what();
      last_was_timeout = true;
    } catch (const TransportError& e) {
      outcome = AttemptRecord::Outcome::kTransport;
      last_error = e.what();
      last_was_timeout = false;
    } catch (const ScriptMissError&) {
      std::lock_guard lock(log_mutex_);
      attempts_.push_back({call.role, key, AttemptRecord::Outcome::kScriptMiss});
      throw;
    } catch (...) {
      std::lock_guard lock(log_mutex_);
      attempts_.push_back({call.role, key, AttemptRecord::Outcome::kOther});
      throw;
    }
    {
      std::lock_guard lock(log_mutex_);
      attempts_.push_back({call.role, key, outcome});
    }
    spdlog::debug("{} call attempt {}/{} failed: {}", to_string(call.role), attempt, attempts, last_error);
  }
  if (last_was_timeout) {
    throw TimeoutError(std::string(to_string(call.role)) + " call timed out after " +
                           std::to_string(attempts) + " attempts",
                       attempts);
  }
  throw TransportError(std::string(to_string(call.role)) + " call failed after " +
                       std::to_string(attempts) + " attempts: " + last_error);
}

ChatReply ModelGateway::complete(const ChatCall& call, UsageMeter* meter) {
  if (!(call.timeout > Seconds::zero())) throw GatewayError("call timeout must be positive");
  const std::string key = cache_key(call);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return Seconds(std::chrono::steady_clock::now() - start).count(); };

  if (!options_.cache) {
    ChatReply reply = call_backend(call, key);
    account(reply, meter);
    return reply;
  }

  if (auto hit = cache_.lookup(key)) {
    ChatReply reply{hit->text, 0, 0, elapsed(), true};
    account(reply, meter);
    return reply;
  }

  std::promise<ChatReply> promise;
  std::shared_future<ChatReply> shared;
  bool owner = false;
  {
    std::lock_guard lock(inflight_mutex_);
    auto it = inflight_.find(key);
    if (it != inflight_.end()) {
      shared = it->second;
    } else {
      shared = promise.get_future().share();
      inflight_.emplace(key, shared);
      owner = true;
    }
  }

  if (!owner) {
    ChatReply reply = shared.get();
    reply.prompt_tokens = 0;
    reply.completion_tokens = 0;
    reply.cache_hit = true;
    reply.latency_s = elapsed();
    account(reply, meter);
    return reply;
  }

  try {
    ChatReply reply = call_backend(call, key);
    cache_.store(key, CachedReply{reply.text, reply.prompt_tokens, reply.completion_tokens}, chat_id_,
                 call.role);
    promise.set_value(reply);
    {
      std::lock_guard lock(inflight_mutex_);
      inflight_.erase(key);
    }
    account(reply, meter);
    return reply;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(inflight_mutex_);
    inflight_.erase(key);
    throw;
  }
}

std::vector<EmbeddingVector> ModelGateway::embed_batch(std::span<const std::string> texts) {
  if (texts.empty()) throw GatewayError("empty batch");
  if (!embedder_) throw GatewayError("no embedding backend configured");

  std::vector<std::string> misses;
  {
    std::lock_guard lock(embed_mutex_);
    std::map<std::string_view, bool> queued;
    for (const auto& t : texts) {
      if (!embed_cache_.contains(t) && !queued.contains(t)) {
        queued.emplace(t, true);
        misses.push_back(t);
      }
    }
  }
  if (!misses.empty()) {
    auto raw = embedder_->embed(misses);
    if (raw.size() != misses.size()) {
      throw TransportError("embedding backend returned " + std::to_string(raw.size()) +
                           " vectors for " + std::to_string(misses.size()) + " inputs");
    }
    std::vector<EmbeddingVector> fresh;
    fresh.reserve(raw.size());
    for (auto& r : raw) fresh.push_back(normalize_embedding(std::move(r)));
    std::lock_guard lock(embed_mutex_);
    for (std::size_t i = 0; i < misses.size(); ++i) embed_cache_.emplace(misses[i], std::move(fresh[i]));
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::lock_guard lock(embed_mutex_);
  for (const auto& t : texts) {
    const auto& v = embed_cache_.find(t)->second;
    if (!out.empty() && out.front().values.size() != v.values.size()) {
      throw GatewayError("embedding dimension mismatch within batch");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace construm
