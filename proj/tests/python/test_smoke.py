# Copyright 2026 The ConStruM Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Smoke tests for the Python bindings."""

import json
import math

import pytest

import construm


def twin_tables():
    shared = "systolic blood pressure reading in mmhg taken while seated"
    return [
        {
            "table_id": "vitals",
            "name": "vitals",
            "description": "bedside vital signs",
            "ordered": True,
            "columns": [
                {"name": "bp_sys", "description": shared},
                {"name": "bp_sys_copy", "description": shared},
                {"name": "heart_rate", "description": "beats per minute counted at the wrist"},
                {"name": "note", "description": "see bp_sys for the seated reading"},
            ],
        }
    ]


def test_version_and_exports():
    assert construm.__version__ == "0.1.0"
    assert issubclass(construm.ParseError, construm.Error)
    assert issubclass(construm.CatalogError, construm.Error)


def test_catalog_round_trip_and_columns():
    catalog = construm.catalog_from_tables(twin_tables())
    assert len(catalog) == 4
    assert catalog.side == "target"
    assert not catalog.masked
    cols = catalog.columns()
    assert [c["cid"] for c in cols] == ["C1", "C2", "C3", "C4"]
    assert cols[0]["name"] == "bp_sys"
    assert catalog.column("vitals:heart_rate")["cid"] == "C3"
    again = construm.Catalog.parse(catalog.to_json(), "target")
    assert again.columns() == cols


def test_masking_removes_raw_identifiers():
    catalog = construm.catalog_from_tables(twin_tables())
    masked = catalog.mask()
    assert masked.masked
    for col in masked.columns():
        assert col["display_name"] == col["cid"]
        assert catalog.find_raw_identifiers(col["description"]) == []
    assert catalog.find_raw_identifiers("compare bp_sys with heart_rate") == ["bp_sys", "heart_rate"]


def test_similarity_groups_join_identical_texts():
    tables = twin_tables()
    tables.append(
        {
            "table_id": "archive",
            "name": "archive",
            "columns": [{"name": "heart_rate", "description": "beats per minute counted at the wrist"}],
        }
    )
    catalog = construm.catalog_from_tables(tables)
    # Without the table name the two heart_rate texts are identical.
    groups = construm.similarity_groups(catalog, tau=1.0, include_table_name=False)
    as_sets = sorted(sorted(g) for g in groups)
    assert as_sets == [["C1"], ["C2"], ["C3", "C5"], ["C4"]]
    loose = construm.similarity_groups(catalog, tau=-1.0)
    assert [sorted(g) for g in loose] == [["C1", "C2", "C3", "C4", "C5"]]
    strict = construm.similarity_groups(catalog, tau=1.0 + 1e-6, include_table_name=False)
    assert sorted(sorted(g) for g in strict) == [["C1"], ["C2"], ["C3"], ["C4"], ["C5"]]


def test_weighted_total_formula():
    slices = [(12, 0.917), (28, 0.964), (32, 0.906), (5, 1.0)]
    expected = sum(n * a for n, a in slices) / sum(n for n, _ in slices)
    assert math.isclose(construm.weighted_total(slices), expected, rel_tol=0, abs_tol=1e-12)
    assert abs(construm.weighted_total(slices) - 0.935) <= 0.002


def test_parse_errors_surface_as_python_exceptions():
    with pytest.raises(construm.ParseError):
        construm.Catalog.parse("{", "target")
    with pytest.raises(construm.CatalogError):
        construm.Catalog.parse(json.dumps({"tables": []}), "target")
    catalog = construm.catalog_from_tables(twin_tables())
    with pytest.raises(construm.CatalogError):
        catalog.column("C99")


def test_cli_in_process(tmp_path):
    catalog = construm.catalog_from_tables(twin_tables())
    path = tmp_path / "catalog.json"
    path.write_text(catalog.to_json())
    out = tmp_path / "graph.json"
    code, stdout, stderr = construm.run_cli(
        ["build-graph", "--catalog", str(path), "--side", "target", "--tau", "0.9", "--out", str(out)]
    )
    assert code == 0, stderr
    assert out.exists()
    assert (tmp_path / "graph.run_config.json").exists()
    assert "links" in stdout
    code, _, stderr = construm.run_cli(["build-graph", "--out", str(out)])
    assert code == 1
    assert "--catalog" in stderr
