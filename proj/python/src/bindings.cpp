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


#include <sstream>

#include <nlohmann/json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "construm/cli.hpp"
#include "construm/config.hpp"
#include "construm/error.hpp"
#include "construm/evaluation.hpp"
#include "construm/schema.hpp"
#include "construm/similarity_graph.hpp"

namespace py = pybind11;
using construm::SchemaCatalog;
using construm::Side;

namespace {

py::dict column_dict(const SchemaCatalog& catalog, const construm::ColumnMeta& c) {
  py::dict d;
  d["cid"] = c.cid;
  d["table_id"] = c.ref.table_id;
  d["ordinal"] = c.ref.ordinal;
  d["name"] = c.raw_name;
  d["display_name"] = catalog.display_name(c.ref);
  d["description"] = c.description;
  return d;
}

std::shared_ptr<construm::ModelGateway> hash_gateway(std::size_t dimension, std::uint64_t seed) {
  construm::RunConfig config;
  config.hash_dimension = dimension;
  config.hash_seed = seed;
  config.cache = false;
  return construm::make_gateway(config, false);
}

}  // namespace

PYBIND11_MODULE(_construm, m) {
  m.doc() = "Schema matching with context trees and similarity hypergraphs";

  auto error = py::register_exception<construm::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<construm::ParseError>(m, "ParseError", error.ptr());
  py::register_exception<construm::CatalogError>(m, "CatalogError", error.ptr());

  py::class_<SchemaCatalog>(m, "Catalog")
      .def_static(
          "load", [](const std::string& path, const std::string& side) {
            return construm::load_catalog(path, construm::parse_side(side));
          },
          py::arg("path"), py::arg("side") = "target")
      .def_static(
          "parse", [](const std::string& text, const std::string& side) {
            return construm::parse_catalog(text, construm::parse_side(side));
          },
          py::arg("text"), py::arg("side") = "target")
      .def_property_readonly("side", [](const SchemaCatalog& c) { return std::string(construm::to_string(c.side())); })
      .def_property_readonly("masked", &SchemaCatalog::masked)
      .def("__len__", &SchemaCatalog::size)
      .def("columns", [](const SchemaCatalog& c) {
        py::list out;
        for (const auto& col : c.columns()) out.append(column_dict(c, col));
        return out;
      })
      .def("column", [](const SchemaCatalog& c, const std::string& token) {
        return column_dict(c, c.column(construm::resolve_column(c, token)));
      })
      .def("tables", [](const SchemaCatalog& c) {
        std::vector<std::string> ids;
        for (const auto& t : c.tables()) ids.push_back(t.table_id);
        return ids;
      })
      .def("mask", [](const SchemaCatalog& c) { return construm::mask_catalog(c); })
      .def("to_json", [](const SchemaCatalog& c) { return construm::catalog_to_json(c).dump(); })
      .def("find_raw_identifiers", [](const SchemaCatalog& c, const std::string& text) {
        return construm::find_raw_identifiers(c, text);
      })
      .def("embedding_text", [](const SchemaCatalog& c, const std::string& token, bool include_table) {
        return construm::column_embedding_text(c, construm::resolve_column(c, token), include_table);
      }, py::arg("column"), py::arg("include_table") = true);

  m.def(
      "similarity_groups",
      [](const SchemaCatalog& catalog, double tau, bool include_table_name, std::size_t dimension,
         std::uint64_t seed) {
        auto gateway = hash_gateway(dimension, seed);
        auto graph = construm::build_hypergraph(catalog, *gateway, tau, include_table_name);
        std::vector<std::vector<std::string>> out;
        for (const auto& g : graph.groups()) {
          std::vector<std::string> cids;
          for (const auto& ref : g.members) cids.push_back(catalog.column(ref).cid);
          out.push_back(std::move(cids));
        }
        return out;
      },
      py::arg("catalog"), py::arg("tau") = 0.9, py::arg("include_table_name") = true, py::arg("dimension") = 64,
      py::arg("seed") = 17, "Connected components of the thresholded cosine graph, as lists of cids.");

  m.def(
      "weighted_total",
      [](const std::vector<std::pair<std::size_t, double>>& slices) {
        std::vector<construm::SliceAccuracy> s;
        for (const auto& [n, acc] : slices) s.push_back(construm::SliceAccuracy{n, acc});
        return construm::weighted_total(s);
      },
      py::arg("slices"), "Size-weighted mean of (count, accuracy) pairs.");

  m.def(
      "render_report",
      [](const std::string& results_json, const std::string& format) {
        auto table = construm::ablation_table_from_json(nlohmann::json::parse(results_json));
        return construm::render_report(table, construm::parse_report_format(format));
      },
      py::arg("results_json"), py::arg("format") = "markdown");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = construm::cli::dispatch(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command line in process; returns (exit_code, stdout, stderr).");
}
