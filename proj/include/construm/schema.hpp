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

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace construm {

enum class Side { kSource, kTarget };

std::string_view to_string(Side side) noexcept;
Side parse_side(std::string_view s);

// Identity of one column: which catalog side, which table, position in table order.
struct ColumnRef {
  Side side = Side::kSource;
  std::string table_id;
  std::size_t ordinal = 0;

  friend auto operator<=>(const ColumnRef&, const ColumnRef&) = default;
  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};

std::string to_string(const ColumnRef& ref);

struct ColumnRefHash {
  std::size_t operator()(const ColumnRef& r) const noexcept;
};

struct ColumnMeta {
  ColumnRef ref;
  std::string raw_name;
  std::string description;
  std::string cid;  // "C<n>", unique per catalog
};

struct TableMeta {
  std::string table_id;
  std::string name;
  std::string description;
  bool ordered = false;
  std::vector<ColumnRef> columns;  // ordinals 0..n-1
};

// Immutable after construction; indexes are validated bijections.
class SchemaCatalog {
 public:
  SchemaCatalog(Side side, std::vector<TableMeta> tables, std::vector<ColumnMeta> columns,
                bool masked = false);

  Side side() const noexcept { return side_; }
  bool masked() const noexcept { return masked_; }
  std::size_t size() const noexcept { return columns_.size(); }

  std::span<const TableMeta> tables() const noexcept { return tables_; }
  // All columns in catalog order (tables in file order, then ordinal).
  std::span<const ColumnMeta> columns() const noexcept { return columns_; }

  const ColumnMeta& column(const ColumnRef& ref) const;
  const ColumnMeta* find(const ColumnRef& ref) const noexcept;
  bool contains(const ColumnRef& ref) const noexcept { return find(ref) != nullptr; }
  const ColumnRef& by_cid(std::string_view cid) const;
  const ColumnMeta* find_cid(std::string_view cid) const noexcept;
  const TableMeta& table(std::string_view table_id) const;
  const TableMeta& table_of(const ColumnRef& ref) const { return table(ref.table_id); }

  // Index of the column in catalog order.
  std::size_t position(const ColumnRef& ref) const;

  // Name shown in prompts: the CID when masked, the raw name otherwise.
  const std::string& display_name(const ColumnRef& ref) const;

  // Finds a column by table id and raw name.
  const ColumnMeta* find_by_name(std::string_view table_id, std::string_view raw_name) const;

 private:
  Side side_;
  bool masked_;
  std::vector<TableMeta> tables_;
  std::vector<ColumnMeta> columns_;
  std::map<ColumnRef, std::size_t> column_index_;
  std::map<std::string, std::size_t, std::less<>> cid_index_;
  std::map<std::string, std::size_t, std::less<>> table_index_;
};

// Parses the catalog JSON document. CIDs are assigned C1.. in file order.
SchemaCatalog parse_catalog(std::string_view json_text, Side side,
                            std::string_view origin = "<memory>");
SchemaCatalog load_catalog(const std::filesystem::path& path, Side side);
nlohmann::json catalog_to_json(const SchemaCatalog& catalog);

// Fresh deterministic CIDs and every raw identifier in catalog texts replaced
// by its owning column's CID (longest identifier first, word boundaries).
SchemaCatalog mask_catalog(const SchemaCatalog& catalog);

struct IdentifierReplacement {
  std::string raw;
  std::string cid;
};

// Single left-to-right pass; at each word start the longest matching
// identifier wins. Replaced text is never rescanned.
std::string replace_identifiers(std::string_view text,
                                std::span<const IdentifierReplacement> replacements);

// Raw identifiers of `catalog` occurring as whole words in `text`.
std::vector<std::string> find_raw_identifiers(const SchemaCatalog& catalog,
                                              std::string_view text);

struct MatchQuery {
  ColumnRef source;
  std::vector<ColumnRef> shortlist;  // C0, upstream order
  std::optional<ColumnRef> ground_truth;
  std::string slice;                 // benchmark slice label, may be empty
};

}  // namespace construm
