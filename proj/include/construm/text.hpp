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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace construm::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string to_lower(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Identifier characters for word-boundary matching: [A-Za-z0-9_].
bool is_word_char(char c) noexcept;

// Every match of `token` in `s` whose neighbours are not word characters.
std::vector<std::size_t> find_word(std::string_view s, std::string_view token);
bool contains_word(std::string_view s, std::string_view token);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0) noexcept;
std::string sha256_hex(std::string_view data);

// Whitespace token count; the accounting unit of the offline backends.
std::int64_t count_tokens(std::string_view s);

// Indent every line of `block` by `prefix`.
std::string indent(std::string_view block, std::string_view prefix);

}  // namespace construm::text
