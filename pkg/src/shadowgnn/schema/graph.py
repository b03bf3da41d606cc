"""Schema graphs and Spider ``tables.json`` ingestion."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Optional


class SchemaError(ValueError):
    pass


class EdgeLabel(IntEnum):
    BELONGS_TO = 0  # column -> table
    HAS_COLUMN = 1  # table -> column
    FOREIGN_KEY_FORWARD = 2  # referencing column -> referenced column
    FOREIGN_KEY_BACKWARD = 3
    PRIMARY_KEY = 4  # key column -> table
    PRIMARY_KEY_OF = 5  # table -> key column
    SELF_LOOP = 6


NUM_EDGE_LABELS = len(EdgeLabel)

_REVERSE = {
    EdgeLabel.BELONGS_TO: EdgeLabel.HAS_COLUMN,
    EdgeLabel.HAS_COLUMN: EdgeLabel.BELONGS_TO,
    EdgeLabel.FOREIGN_KEY_FORWARD: EdgeLabel.FOREIGN_KEY_BACKWARD,
    EdgeLabel.FOREIGN_KEY_BACKWARD: EdgeLabel.FOREIGN_KEY_FORWARD,
    EdgeLabel.PRIMARY_KEY: EdgeLabel.PRIMARY_KEY_OF,
    EdgeLabel.PRIMARY_KEY_OF: EdgeLabel.PRIMARY_KEY,
    EdgeLabel.SELF_LOOP: EdgeLabel.SELF_LOOP,
}

TABLE, COLUMN = 0, 1

_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|\w+|[^\w\s]")


def normalize_name(name: str) -> tuple[str, ...]:
    """Lower-case, underscores to spaces, whitespace split."""
    return tuple(name.lower().replace("_", " ").split())


def tokenize_question(text: str) -> list[str]:
    """Lower-cased tokens with punctuation split off; ``_`` acts as a separator."""
    return _TOKEN_RE.findall(text.lower().replace("_", " "))


@dataclass(frozen=True)
class SchemaGraph:
    """Tables and columns as typed nodes with labelled directed edges.

    Node ids are dense: tables ``0..T-1`` first, then columns ``T..T+C-1``.
    Column 0 is Spider's global ``*`` column and has no owning table.
    """

    db_id: str
    table_names: tuple[tuple[str, ...], ...]
    table_names_original: tuple[str, ...]
    column_names: tuple[tuple[str, ...], ...]
    column_names_original: tuple[str, ...]
    column_tables: tuple[Optional[int], ...]
    column_types: tuple[str, ...]
    primary_keys: tuple[int, ...]
    foreign_keys: tuple[tuple[int, int], ...]
    edges: tuple[tuple[int, int, int], ...]

    @property
    def num_tables(self) -> int:
        return len(self.table_names)

    @property
    def num_columns(self) -> int:
        return len(self.column_names)

    @property
    def num_nodes(self) -> int:
        return self.num_tables + self.num_columns

    def table_node(self, t: int) -> int:
        return t

    def column_node(self, c: int) -> int:
        return self.num_tables + c

    def is_table(self, node: int) -> bool:
        return node < self.num_tables

    def node_type(self, node: int) -> int:
        return TABLE if node < self.num_tables else COLUMN

    def node_types(self) -> list[int]:
        return [self.node_type(j) for j in range(self.num_nodes)]

    def node_tokens(self, node: int) -> tuple[str, ...]:
        if node < self.num_tables:
            return self.table_names[node]
        return self.column_names[node - self.num_tables]

    def node_table(self, node: int) -> Optional[int]:
        """Owning table index of a column node (``None`` for ``*`` and tables)."""
        if node < self.num_tables:
            return None
        return self.column_tables[node - self.num_tables]

    def table_columns(self, t: int) -> list[int]:
        return [c for c, owner in enumerate(self.column_tables) if owner == t]

    @property
    def star_node(self) -> int:
        return self.num_tables

    def node_label(self, node: int) -> str:
        if node < self.num_tables:
            return self.table_names_original[node]
        c = node - self.num_tables
        owner = self.column_tables[c]
        if owner is None:
            return "*"
        return f"{self.table_names_original[owner]}.{self.column_names_original[c]}"


def build_edges(
    num_tables: int,
    column_tables: Iterable[Optional[int]],
    primary_keys: Iterable[int],
    foreign_keys: Iterable[tuple[int, int]],
) -> tuple[tuple[int, int, int], ...]:
    edges: list[tuple[int, int, int]] = []

    def pair(src: int, label: EdgeLabel, dst: int) -> None:
        edges.append((src, int(label), dst))
        edges.append((dst, int(_REVERSE[label]), src))

    column_tables = list(column_tables)
    for c, owner in enumerate(column_tables):
        if owner is not None:
            pair(num_tables + c, EdgeLabel.BELONGS_TO, owner)
    for c in primary_keys:
        owner = column_tables[c]
        if owner is not None:
            pair(num_tables + c, EdgeLabel.PRIMARY_KEY, owner)
    for src, dst in foreign_keys:
        pair(num_tables + src, EdgeLabel.FOREIGN_KEY_FORWARD, num_tables + dst)
    return tuple(edges)


def _flatten_keys(keys) -> list[int]:
    out: list[int] = []
    for k in keys:
        if isinstance(k, (list, tuple)):
            out.extend(int(x) for x in k)
        else:
            out.append(int(k))
    return out


def graph_from_dict(entry: dict) -> SchemaGraph:
    db_id = entry.get("db_id", "<unknown>")
    required = (
        "db_id",
        "table_names_original",
        "column_names_original",
        "column_types",
        "primary_keys",
        "foreign_keys",
    )
    for key in required:
        if key not in entry:
            raise SchemaError(f"database {db_id!r}: missing field {key!r}")
    tables = list(entry["table_names_original"])
    columns = entry["column_names_original"]
    types = list(entry["column_types"])
    if len(types) != len(columns):
        raise SchemaError(f"database {db_id!r}: {len(columns)} columns but {len(types)} column types")
    owners: list[Optional[int]] = []
    names: list[str] = []
    for i, (owner, name) in enumerate(columns):
        if owner == -1:
            owners.append(None)
        elif 0 <= owner < len(tables):
            owners.append(int(owner))
        else:
            raise SchemaError(f"database {db_id!r}: column {i} ({name!r}) has owner {owner} out of range")
        names.append(name)
    for i, owner in enumerate(owners):
        if owner is None and names[i] != "*":
            raise SchemaError(f"database {db_id!r}: column {i} ({names[i]!r}) has no owning table")
    pks = _flatten_keys(entry["primary_keys"])
    fks: list[tuple[int, int]] = []
    for fk in entry["foreign_keys"]:
        if len(fk) != 2:
            raise SchemaError(f"database {db_id!r}: malformed foreign key {fk!r}")
        src, dst = int(fk[0]), int(fk[1])
        for c in (src, dst):
            if not 0 <= c < len(columns) or owners[c] is None:
                raise SchemaError(f"database {db_id!r}: dangling foreign-key column index {c}")
        fks.append((src, dst))
    for c in pks:
        if not 0 <= c < len(columns):
            raise SchemaError(f"database {db_id!r}: dangling primary-key column index {c}")
    return SchemaGraph(
        db_id=entry["db_id"],
        table_names=tuple(normalize_name(t) for t in tables),
        table_names_original=tuple(tables),
        column_names=tuple(("*",) if n == "*" else normalize_name(n) for n in names),
        column_names_original=tuple(names),
        column_tables=tuple(owners),
        column_types=tuple(types),
        primary_keys=tuple(pks),
        foreign_keys=tuple(fks),
        edges=build_edges(len(tables), owners, pks, fks),
    )


def load_tables(path) -> list[SchemaGraph]:
    """Parse a Spider-layout ``tables.json`` into one graph per database."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise SchemaError(f"{path}: expected a JSON array of databases")
    return [graph_from_dict(entry) for entry in doc]


def graph_to_dict(graph: SchemaGraph) -> dict:
    """Inverse of :func:`graph_from_dict` (Spider layout, original names)."""
    return {
        "db_id": graph.db_id,
        "table_names_original": list(graph.table_names_original),
        "table_names": [" ".join(t) for t in graph.table_names],
        "column_names_original": [
            [-1 if owner is None else owner, name]
            for owner, name in zip(graph.column_tables, graph.column_names_original)
        ],
        "column_names": [
            [-1 if owner is None else owner, " ".join(toks)]
            for owner, toks in zip(graph.column_tables, graph.column_names)
        ],
        "column_types": list(graph.column_types),
        "primary_keys": list(graph.primary_keys),
        "foreign_keys": [list(fk) for fk in graph.foreign_keys],
    }


def check_reverse_edges(graph: SchemaGraph) -> bool:
    edges = set(graph.edges)
    return all((dst, int(_REVERSE[EdgeLabel(label)]), src) in edges for src, label, dst in graph.edges)
