"""Deterministic n-gram schema linking with seven match tags."""
from __future__ import annotations

import csv
from enum import IntEnum
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .graph import SchemaGraph, normalize_name, tokenize_question


class LinkTag(IntEnum):
    TABLE_EXACT = 0
    TABLE_PARTIAL = 1
    COLUMN_EXACT = 2
    COLUMN_PARTIAL = 3
    COLUMN_VALUE_EXACT = 4
    COLUMN_VALUE_PARTIAL = 5
    NO_MATCH = 6


NUM_LINK_TAGS = len(LinkTag)

# exact > partial > value-exact > value-partial > no-match
PRIORITY = {
    LinkTag.TABLE_EXACT: 4,
    LinkTag.COLUMN_EXACT: 4,
    LinkTag.TABLE_PARTIAL: 3,
    LinkTag.COLUMN_PARTIAL: 3,
    LinkTag.COLUMN_VALUE_EXACT: 2,
    LinkTag.COLUMN_VALUE_PARTIAL: 1,
    LinkTag.NO_MATCH: 0,
}

# column node id -> tokenised cell values
ValueIndex = Mapping[int, Sequence[tuple[str, ...]]]


def load_value_index(directory, graph: SchemaGraph) -> dict[int, list[tuple[str, ...]]]:
    """Read ``<table>.csv`` files (header row = original column names).

    Missing files are skipped; unknown header names are ignored.
    """
    directory = Path(directory)
    files = {p.stem.lower(): p for p in directory.glob("*.csv")}
    index: dict[int, list[tuple[str, ...]]] = {}
    for t, table in enumerate(graph.table_names_original):
        path = files.get(table.lower())
        if path is None:
            continue
        by_name = {
            graph.column_names_original[c].lower(): graph.column_node(c) for c in graph.table_columns(t)
        }
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                continue
            nodes = [by_name.get(h.strip().lower()) for h in header]
            seen: dict[int, set] = {}
            for record in reader:
                for node, cell in zip(nodes, record):
                    if node is None or not cell.strip():
                        continue
                    toks = tuple(tokenize_question(cell))
                    if toks and toks not in seen.setdefault(node, set()):
                        seen[node].add(toks)
                        index.setdefault(node, []).append(toks)
    return index


def _stamp(tags: np.ndarray, lo: int, hi: int, node: int, tag: LinkTag) -> None:
    for i in range(lo, hi):
        if PRIORITY[tag] > PRIORITY[LinkTag(tags[i, node])]:
            tags[i, node] = tag


def tag_linking(
    question: Sequence[str],
    graph: SchemaGraph,
    value_index: Optional[ValueIndex] = None,
    max_ngram: int = 5,
) -> np.ndarray:
    """Tag every (question position, schema node) cell.

    n-grams are scanned longest first.  An n-gram equal to a node's full name
    stamps an exact tag on every covered position; one whose token set is a
    strict subset of the name's stamps a partial tag.  Cell values in
    ``value_index`` stamp the value tags on their column.  A cell keeps the
    highest-priority tag it is offered.  The ``*`` column is never linked.
    """
    n = len(question)
    if n == 0:
        raise ValueError("tag_linking needs a non-empty question")
    m = graph.num_nodes
    tags = np.full((n, m), int(LinkTag.NO_MATCH), dtype=np.int64)
    names = [graph.node_tokens(j) for j in range(m)]
    name_sets = [set(t) for t in names]
    star = graph.star_node
    toks = [t.lower() for t in question]
    for size in range(min(max_ngram, n), 0, -1):
        for start in range(n - size + 1):
            gram = tuple(toks[start : start + size])
            gset = set(gram)
            for j in range(m):
                if j == star:
                    continue
                is_table = graph.is_table(j)
                if gram == names[j]:
                    tag = LinkTag.TABLE_EXACT if is_table else LinkTag.COLUMN_EXACT
                elif gset < name_sets[j]:
                    tag = LinkTag.TABLE_PARTIAL if is_table else LinkTag.COLUMN_PARTIAL
                else:
                    continue
                _stamp(tags, start, start + size, j, tag)
            if value_index:
                for node, values in value_index.items():
                    for value in values:
                        if gram == value:
                            _stamp(tags, start, start + size, node, LinkTag.COLUMN_VALUE_EXACT)
                            break
                        if gset < set(value):
                            _stamp(tags, start, start + size, node, LinkTag.COLUMN_VALUE_PARTIAL)
    return tags


def value_index_from_rows(graph: SchemaGraph, rows: Mapping[str, Sequence[str]]) -> dict[int, list[tuple[str, ...]]]:
    """Build an index from ``{"table.column": [values...]}`` (original names, case-insensitive)."""
    lookup = {graph.node_label(graph.column_node(c)).lower(): graph.column_node(c) for c in range(graph.num_columns)}
    index: dict[int, list[tuple[str, ...]]] = {}
    for key, values in rows.items():
        node = lookup.get(key.lower())
        if node is None:
            raise KeyError(f"{graph.db_id}: unknown column {key!r}")
        index[node] = [tuple(tokenize_question(str(v))) for v in values]
    return index


__all__ = [
    "LinkTag",
    "NUM_LINK_TAGS",
    "PRIORITY",
    "ValueIndex",
    "load_value_index",
    "normalize_name",
    "tag_linking",
    "value_index_from_rows",
]
