"""Bundled desk-scale data: three small schemas and the golden SQL corpus."""
from __future__ import annotations

import json
from importlib import resources

from ..schema.graph import SchemaGraph, graph_from_dict


def _read(name: str):
    return json.loads(resources.files(__name__).joinpath(name).read_text())


def desk_tables_path():
    return resources.files(__name__).joinpath("desk_tables.json")


def desk_schemas() -> dict[str, SchemaGraph]:
    return {entry["db_id"]: graph_from_dict(entry) for entry in _read("desk_tables.json")}


def golden_records() -> list[dict]:
    return _read("golden_corpus.json")


def golden_corpus() -> list[tuple[str, SchemaGraph]]:
    """``(sql, graph)`` pairs covering every grammar production."""
    schemas = desk_schemas()
    return [(r["sql"], schemas[r["db_id"]]) for r in golden_records()]
