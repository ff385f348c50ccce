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

#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "construm/error.hpp"
#include "construm/evaluation.hpp"

namespace construm {

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "markdown" || s == "md") return ReportFormat::kMarkdown;
  throw Error("unknown report format \"" + std::string(s) + "\" (expected csv or markdown)");
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : fixed(v, 17);
}

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

std::string md_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + md_cell(c) + " |";
  return out + "\n";
}

std::string md_rule(std::size_t n) {
  std::string out = "|";
  for (std::size_t i = 0; i < n; ++i) out += " --- |";
  return out + "\n";
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  return out + "\n";
}

}  // namespace

std::string csv_escape(std::string_view field) {
  bool quote = field.find_first_of(",\"\r\n") != std::string_view::npos ||
               (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!quote) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
      row.clear();
      field.clear();
      field_started = false;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ParseError("csv", "unterminated quoted field");
  if (field_started || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_report(const AblationTable& table, ReportFormat format) {
  if (table.reports.empty()) return "";
  const auto& first = table.reports.front();
  std::set<std::string> slice_names;
  for (const auto& r : table.reports) {
    for (const auto& [name, s] : r.slices) slice_names.insert(name);
  }
  std::size_t total = 0;
  for (const auto& [name, s] : first.slices) total += s.count;

  if (format == ReportFormat::kCsv) {
    std::string out = csv_line({"mode", "slice", "metric", "value"});
    for (const auto& r : table.reports) {
      for (const auto& [name, s] : r.slices) {
        out += csv_line({r.mode, name, "count", std::to_string(s.count)});
        out += csv_line({r.mode, name, "acc@1", exact(s.accuracy)});
      }
      out += csv_line({r.mode, "Total", "acc@1", exact(r.weighted_total)});
      out += csv_line({r.mode, "Total", "acc@3", exact(r.acc_at_3)});
      out += csv_line({r.mode, "Total", "acc@5", exact(r.acc_at_5)});
      out += csv_line({r.mode, "Total", "llm_calls_per_query", exact(r.mean_llm_calls)});
      out += csv_line({r.mode, "Total", "tokens_per_query", exact(r.mean_tokens)});
      out += csv_line({r.mode, "Total", "latency_s", exact(r.mean_latency_s)});
    }
    return out;
  }

  std::vector<std::string> header{"Slice", "N"};
  for (const auto& r : table.reports) header.push_back(r.mode);
  std::string out = "## Accuracy by slice\n\n" + md_row(header) + md_rule(header.size());
  for (const auto& name : slice_names) {
    std::vector<std::string> row{name};
    auto it = first.slices.find(name);
    row.push_back(it == first.slices.end() ? "0" : std::to_string(it->second.count));
    for (const auto& r : table.reports) {
      auto s = r.slices.find(name);
      row.push_back(s == r.slices.end() ? "-" : fixed(s->second.accuracy, 3));
    }
    out += md_row(row);
  }
  std::vector<std::string> total_row{"Total", std::to_string(total)};
  for (const auto& r : table.reports) total_row.push_back(fixed(r.weighted_total, 3));
  out += md_row(total_row);

  out += "\n## Top-k accuracy\n\n" + md_row({"Mode", "acc@1", "acc@3", "acc@5"}) + md_rule(4);
  for (const auto& r : table.reports) {
    out += md_row({r.mode, fixed(r.acc_at_1, 3), fixed(r.acc_at_3, 3), fixed(r.acc_at_5, 3)});
  }
  out += "\nRanks after the first: the chosen target, then the remaining candidates by embedding cosine.\n";

  out += "\n## Efficiency\n\n" + md_row({"Mode", "LLM calls/query", "Tokens/query", "Latency (s)"}) + md_rule(4);
  for (const auto& r : table.reports) {
    out += md_row({r.mode, fixed(r.mean_llm_calls, 2), fixed(std::round(r.mean_tokens), 0), fixed(r.mean_latency_s, 2)});
  }
  return out;
}

std::string render_query_csv(const AblationTable& table) {
  std::string out = csv_line({"mode", "slice", "source", "truth", "chosen", "correct", "rank", "llm_calls", "tokens",
                              "latency_s", "error"});
  for (const auto& r : table.reports) {
    for (const auto& row : r.rows) {
      out += csv_line({r.mode, row.slice, row.source_cid, row.truth_cid, row.chosen_cid, row.correct ? "1" : "0",
                       row.rank ? std::to_string(*row.rank) : "", std::to_string(row.trace.llm_calls),
                       std::to_string(row.trace.total_tokens), exact(row.trace.latency_s), row.error});
    }
  }
  return out;
}

}  // namespace construm
