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

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "construm/gateway.hpp"

namespace construm {

namespace fs = std::filesystem;

ReplyCache::ReplyCache(std::optional<fs::path> directory) : directory_(std::move(directory)) {
  if (directory_) fs::create_directories(*directory_);
}

std::size_t ReplyCache::memory_size() const {
  std::lock_guard lock(mutex_);
  return memory_.size();
}

std::optional<CachedReply> ReplyCache::lookup(const std::string& key) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (!directory_) return std::nullopt;
  const auto path = *directory_ / (key + ".json");
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    auto record = nlohmann::json::parse(in);
    CachedReply reply{record.at("text").get<std::string>(), record.value("prompt_tokens", 0LL),
                      record.value("completion_tokens", 0LL)};
    std::lock_guard lock(mutex_);
    memory_.emplace(key, reply);
    return reply;
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable cache record {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

void ReplyCache::store(const std::string& key, const CachedReply& reply, std::string_view backend_id,
                       CallRole role) {
  {
    std::lock_guard lock(mutex_);
    memory_.insert_or_assign(key, reply);
  }
  if (!directory_) return;
  const auto final_path = *directory_ / (key + ".json");
  if (fs::exists(final_path)) return;

  static std::atomic<unsigned long> counter{0};
  std::ostringstream tmp_name;
  tmp_name << "." << key << "." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "."
           << counter.fetch_add(1) << ".tmp";
  const auto tmp_path = *directory_ / tmp_name.str();
  nlohmann::json record = {{"key", key},
                           {"backend", backend_id},
                           {"role", to_string(role)},
                           {"text", reply.text},
                           {"prompt_tokens", reply.prompt_tokens},
                           {"completion_tokens", reply.completion_tokens}};
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    out << record.dump(2) << '\n';
    if (!out) {
      spdlog::warn("failed to write cache record {}", tmp_path.string());
      return;
    }
  }
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec) {
    spdlog::warn("failed to publish cache record {}: {}", final_path.string(), ec.message());
    fs::remove(tmp_path, ec);
  }
}

}  // namespace construm
