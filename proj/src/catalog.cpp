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

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "construm/error.hpp"
#include "construm/schema.hpp"
#include "construm/text.hpp"

namespace construm {

using nlohmann::json;

std::string_view to_string(Side side) noexcept {
  return side == Side::kSource ? "source" : "target";
}

Side parse_side(std::string_view s) {
  if (s == "source") return Side::kSource;
  if (s == "target") return Side::kTarget;
  throw ParseError("side", "expected \"source\" or \"target\", got \"" + std::string(s) + "\"");
}

std::string to_string(const ColumnRef& ref) {
  return std::string(to_string(ref.side)) + ":" + ref.table_id + "#" + std::to_string(ref.ordinal);
}

std::size_t ColumnRefHash::operator()(const ColumnRef& r) const noexcept {
  auto h = text::fnv1a64(r.table_id, static_cast<std::uint64_t>(r.side));
  return static_cast<std::size_t>(h ^ (r.ordinal * 0x9E3779B97F4A7C15ULL));
}

namespace {

bool is_cid(std::string_view s) {
  if (s.size() < 2 || s[0] != 'C' || s[1] == '0') return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

SchemaCatalog::SchemaCatalog(Side side, std::vector<TableMeta> tables,
                             std::vector<ColumnMeta> columns, bool masked)
    : side_(side), masked_(masked), tables_(std::move(tables)), columns_(std::move(columns)) {
  if (columns_.empty()) throw CatalogError("empty catalog");
  for (std::size_t t = 0; t < tables_.size(); ++t) {
    const auto& table = tables_[t];
    if (!table_index_.emplace(table.table_id, t).second) {
      throw CatalogError("duplicate table id \"" + table.table_id + "\"");
    }
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      const auto& ref = table.columns[i];
      if (ref.ordinal != i || ref.table_id != table.table_id || ref.side != side_) {
        throw CatalogError("table \"" + table.table_id + "\" columns are not contiguous in ordinal");
      }
    }
  }
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& c = columns_[i];
    if (!table_index_.contains(c.ref.table_id)) {
      throw CatalogError("column " + to_string(c.ref) + " references unknown table");
    }
    if (!is_cid(c.cid)) throw CatalogError("malformed cid \"" + c.cid + "\"");
    if (!column_index_.emplace(c.ref, i).second) {
      throw CatalogError("duplicate column reference " + to_string(c.ref));
    }
    if (!cid_index_.emplace(c.cid, i).second) {
      throw CatalogError("duplicate cid \"" + c.cid + "\"");
    }
  }
  std::size_t listed = 0;
  for (const auto& table : tables_) {
    listed += table.columns.size();
    for (const auto& ref : table.columns) {
      if (!column_index_.contains(ref)) {
        throw CatalogError("table column " + to_string(ref) + " has no metadata");
      }
    }
  }
  if (listed != columns_.size()) throw CatalogError("column metadata not listed by any table");
}

const ColumnMeta* SchemaCatalog::find(const ColumnRef& ref) const noexcept {
  auto it = column_index_.find(ref);
  return it == column_index_.end() ? nullptr : &columns_[it->second];
}

const ColumnMeta& SchemaCatalog::column(const ColumnRef& ref) const {
  if (const auto* meta = find(ref)) return *meta;
  throw CatalogError("unknown column " + to_string(ref));
}

const ColumnMeta* SchemaCatalog::find_cid(std::string_view cid) const noexcept {
  auto it = cid_index_.find(cid);
  return it == cid_index_.end() ? nullptr : &columns_[it->second];
}

const ColumnRef& SchemaCatalog::by_cid(std::string_view cid) const {
  if (const auto* meta = find_cid(cid)) return meta->ref;
  throw CatalogError("unknown cid \"" + std::string(cid) + "\"");
}

const TableMeta& SchemaCatalog::table(std::string_view table_id) const {
  auto it = table_index_.find(table_id);
  if (it == table_index_.end()) throw CatalogError("unknown table \"" + std::string(table_id) + "\"");
  return tables_[it->second];
}

std::size_t SchemaCatalog::position(const ColumnRef& ref) const {
  auto it = column_index_.find(ref);
  if (it == column_index_.end()) throw CatalogError("unknown column " + to_string(ref));
  return it->second;
}

const std::string& SchemaCatalog::display_name(const ColumnRef& ref) const {
  const auto& meta = column(ref);
  return masked_ ? meta.cid : meta.raw_name;
}

const ColumnMeta* SchemaCatalog::find_by_name(std::string_view table_id,
                                              std::string_view raw_name) const {
  auto it = table_index_.find(table_id);
  if (it == table_index_.end()) return nullptr;
  for (const auto& ref : tables_[it->second].columns) {
    const auto& meta = column(ref);
    if (meta.raw_name == raw_name) return &meta;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::string line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n');
  return "line " + std::to_string(line);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(path, std::string("missing field \"") + key + "\"");
  }
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw ParseError(path + "." + key, "expected string");
  return v.get<std::string>();
}

std::string optional_string(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return {};
  if (!obj.at(key).is_string()) throw ParseError(path + "." + key, "expected string");
  return obj.at(key).get<std::string>();
}

}  // namespace

SchemaCatalog parse_catalog(std::string_view json_text, Side side, std::string_view origin) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(origin) + ":" + line_of_offset(json_text, e.byte ? e.byte - 1 : 0),
                     e.what());
  }
  const std::string root = std::string(origin);
  if (!doc.is_object()) throw ParseError(root, "catalog must be a JSON object");
  if (doc.contains("side")) {
    if (!doc["side"].is_string()) throw ParseError(root + ":side", "expected string");
    Side file_side = parse_side(doc["side"].get<std::string>());
    if (file_side != side) {
      throw ParseError(root + ":side", "catalog declares side \"" +
                                           std::string(to_string(file_side)) + "\" but was loaded as \"" +
                                           std::string(to_string(side)) + "\"");
    }
  }
  const auto& tables_json = require(doc, "tables", root);
  if (!tables_json.is_array()) throw ParseError(root + ":tables", "expected array");

  std::vector<TableMeta> tables;
  std::vector<ColumnMeta> columns;
  std::size_t next_cid = 1;
  for (std::size_t t = 0; t < tables_json.size(); ++t) {
    const auto& tj = tables_json[t];
    const std::string path = root + ":tables[" + std::to_string(t) + "]";
    if (!tj.is_object()) throw ParseError(path, "expected object");
    TableMeta table;
    table.table_id = require_string(tj, "table_id", path);
    table.name = optional_string(tj, "name", path);
    if (table.name.empty()) table.name = table.table_id;
    table.description = optional_string(tj, "description", path);
    if (tj.contains("ordered")) {
      if (!tj["ordered"].is_boolean()) throw ParseError(path + ".ordered", "expected boolean");
      table.ordered = tj["ordered"].get<bool>();
    }
    const auto& cols = require(tj, "columns", path);
    if (!cols.is_array()) throw ParseError(path + ".columns", "expected array");
    std::set<std::string, std::less<>> seen;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const std::string cpath = path + ".columns[" + std::to_string(i) + "]";
      if (!cols[i].is_object()) throw ParseError(cpath, "expected object");
      ColumnMeta meta;
      meta.ref = ColumnRef{side, table.table_id, i};
      meta.raw_name = require_string(cols[i], "name", cpath);
      if (meta.raw_name.empty()) throw ParseError(cpath + ".name", "empty column name");
      meta.description = optional_string(cols[i], "description", cpath);
      meta.cid = "C" + std::to_string(next_cid++);
      if (!seen.insert(meta.raw_name).second) {
        throw CatalogError(cpath + ": duplicate column identifier \"" + meta.raw_name +
                           "\" in table \"" + table.table_id + "\"");
      }
      table.columns.push_back(meta.ref);
      columns.push_back(std::move(meta));
    }
    tables.push_back(std::move(table));
  }
  if (columns.empty()) throw CatalogError(root + ": empty catalog");
  return SchemaCatalog(side, std::move(tables), std::move(columns));
}

SchemaCatalog load_catalog(const std::filesystem::path& path, Side side) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CatalogError("cannot open catalog file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_catalog(buf.str(), side, path.string());
}

json catalog_to_json(const SchemaCatalog& catalog) {
  json tables = json::array();
  for (const auto& table : catalog.tables()) {
    json cols = json::array();
    for (const auto& ref : table.columns) {
      const auto& meta = catalog.column(ref);
      cols.push_back({{"name", meta.raw_name}, {"description", meta.description}, {"cid", meta.cid}});
    }
    tables.push_back({{"table_id", table.table_id},
                      {"name", table.name},
                      {"description", table.description},
                      {"ordered", table.ordered},
                      {"columns", std::move(cols)}});
  }
  return {{"side", to_string(catalog.side())}, {"masked", catalog.masked()}, {"tables", std::move(tables)}};
}

// ---------------------------------------------------------------------------
// Masking

std::string replace_identifiers(std::string_view text,
                                std::span<const IdentifierReplacement> replacements) {
  std::vector<const IdentifierReplacement*> by_length;
  by_length.reserve(replacements.size());
  for (const auto& r : replacements) {
    if (!r.raw.empty()) by_length.push_back(&r);
  }
  std::stable_sort(by_length.begin(), by_length.end(),
                   [](const auto* a, const auto* b) { return a->raw.size() > b->raw.size(); });

  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const IdentifierReplacement* hit = nullptr;
    bool left_boundary = i == 0 || !text::is_word_char(text[i - 1]);
    for (const auto* r : by_length) {
      const auto& raw = r->raw;
      if (text.compare(i, raw.size(), raw) != 0) continue;
      if (!left_boundary && text::is_word_char(raw.front())) continue;
      std::size_t end = i + raw.size();
      if (end < text.size() && text::is_word_char(text[end]) && text::is_word_char(raw.back())) continue;
      hit = r;
      break;
    }
    if (hit) {
      out += hit->cid;
      i += hit->raw.size();
    } else {
      out += text[i++];
    }
  }
  return out;
}

SchemaCatalog mask_catalog(const SchemaCatalog& catalog) {
  if (catalog.masked()) return catalog;

  // Global owner: first column in catalog order with that raw name.
  std::map<std::string, std::string, std::less<>> global_owner;
  std::size_t next_cid = 1;
  std::vector<ColumnMeta> columns(catalog.columns().begin(), catalog.columns().end());
  for (auto& c : columns) {
    c.cid = "C" + std::to_string(next_cid++);
    global_owner.emplace(c.raw_name, c.cid);
  }
  std::map<ColumnRef, std::size_t> index;
  for (std::size_t i = 0; i < columns.size(); ++i) index.emplace(columns[i].ref, i);

  std::vector<TableMeta> tables(catalog.tables().begin(), catalog.tables().end());
  for (auto& table : tables) {
    // Same-table columns shadow global owners.
    auto owners = global_owner;
    for (const auto& ref : table.columns) {
      const auto& c = columns[index.at(ref)];
      owners[c.raw_name] = c.cid;
    }
    std::vector<IdentifierReplacement> repl;
    repl.reserve(owners.size());
    for (const auto& [raw, cid] : owners) repl.push_back({raw, cid});

    table.name = replace_identifiers(table.name, repl);
    table.description = replace_identifiers(table.description, repl);
    for (const auto& ref : table.columns) {
      auto& c = columns[index.at(ref)];
      c.description = replace_identifiers(c.description, repl);
    }
  }
  return SchemaCatalog(catalog.side(), std::move(tables), std::move(columns), /*masked=*/true);
}

std::vector<std::string> find_raw_identifiers(const SchemaCatalog& catalog, std::string_view text) {
  std::set<std::string> found;
  for (const auto& c : catalog.columns()) {
    if (text::contains_word(text, c.raw_name)) found.insert(c.raw_name);
  }
  return {found.begin(), found.end()};
}

}  // namespace construm
