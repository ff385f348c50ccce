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

"""Python bindings for the construm schema matcher."""

import json

from ._construm import (
    Catalog,
    CatalogError,
    Error,
    ParseError,
    render_report,
    run_cli,
    similarity_groups,
    weighted_total,
)

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "CatalogError",
    "Error",
    "ParseError",
    "catalog_from_tables",
    "render_report",
    "run_cli",
    "similarity_groups",
    "weighted_total",
]


def catalog_from_tables(tables, side="target"):
    """Builds a catalog from a list of table dicts in the catalog JSON layout."""
    return Catalog.parse(json.dumps({"side": side, "tables": tables}), side)
