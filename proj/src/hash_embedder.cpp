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

#include <cctype>

#include "construm/error.hpp"
#include "construm/gateway.hpp"
#include "construm/text.hpp"

namespace construm {

namespace {

// FNV-1a low bits depend only on the low bits of each byte; a finalizer
// spreads the whole hash before bucketing.
std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw GatewayError("hash embedder dimension must be positive");
}

std::string HashEmbedder::id() const {
  return "hash" + std::to_string(dimension_) + ":seed" + std::to_string(seed_);
}

std::vector<double> HashEmbedder::embed_one(std::string_view input) const {
  std::vector<double> v(dimension_, 0.0);
  auto tokens = text::split_whitespace(text::to_lower(input));
  bool any = false;
  for (auto& tok : tokens) {
    // Strip surrounding punctuation so "made." and "made" share a bucket.
    std::size_t b = 0;
    std::size_t e = tok.size();
    while (b < e && !text::is_word_char(tok[b])) ++b;
    while (e > b && !text::is_word_char(tok[e - 1])) --e;
    if (b == e) continue;
    auto h = mix(text::fnv1a64(std::string_view(tok).substr(b, e - b), seed_));
    v[h % dimension_] += 1.0;
    any = true;
  }
  if (!any) v[mix(text::fnv1a64("<empty>", seed_)) % dimension_] = 1.0;
  return v;
}

std::vector<std::vector<double>> HashEmbedder::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

}  // namespace construm
