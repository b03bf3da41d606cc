"""Relation vocabulary and relation-matrix construction.

The (n+m) x (n+m) matrix lays the question first and the schema nodes
second.  Every cell holds one id of the 26-entry vocabulary below:

====  ======================  ===========================================
id    name                    cell
====  ======================  ===========================================
0-6   LINK_*                  question <-> schema, one per link tag
                              (same id in both directions)
7-11  QQ_DIST_M2 .. P2        question i -> j, clamp(j - i, -2, 2);
                              QQ_DIST_0 is the question self loop
12    BELONGS_TO              column -> its table
13    HAS_COLUMN              table -> its column
14    FK_FORWARD              referencing column -> referenced column
15    FK_BACKWARD             referenced column -> referencing column
16    PRIMARY_KEY             key column -> its table
17    PRIMARY_KEY_OF          table -> its key column
18    TABLE_FK_FORWARD        table holding a foreign key -> referenced table
19    TABLE_FK_BACKWARD       referenced table -> referencing table
20    SELF_TABLE              table diagonal
21    SELF_COLUMN             column diagonal
22    NO_EDGE_SAME_TYPE       table-table or column-column, unrelated
23    NO_EDGE_CROSS_TYPE      table-column, unrelated
24    PAD_QUESTION            reserved for padded question slots
25    PAD_SCHEMA              reserved for padded schema slots
====  ======================  ===========================================

Primary-key edges take precedence over plain membership and forward
foreign keys over backward ones when two edges share a cell.
"""
from __future__ import annotations

from enum import IntEnum
from typing import Sequence

import numpy as np

from .graph import EdgeLabel, SchemaGraph
from .linking import LinkTag


class Rel(IntEnum):
    LINK_TABLE_EXACT = 0
    LINK_TABLE_PARTIAL = 1
    LINK_COLUMN_EXACT = 2
    LINK_COLUMN_PARTIAL = 3
    LINK_VALUE_EXACT = 4
    LINK_VALUE_PARTIAL = 5
    LINK_NONE = 6
    QQ_DIST_M2 = 7
    QQ_DIST_M1 = 8
    QQ_DIST_0 = 9
    QQ_DIST_P1 = 10
    QQ_DIST_P2 = 11
    BELONGS_TO = 12
    HAS_COLUMN = 13
    FK_FORWARD = 14
    FK_BACKWARD = 15
    PRIMARY_KEY = 16
    PRIMARY_KEY_OF = 17
    TABLE_FK_FORWARD = 18
    TABLE_FK_BACKWARD = 19
    SELF_TABLE = 20
    SELF_COLUMN = 21
    NO_EDGE_SAME_TYPE = 22
    NO_EDGE_CROSS_TYPE = 23
    PAD_QUESTION = 24
    PAD_SCHEMA = 25


NUM_RELATIONS = len(Rel)
LINK_RELATIONS = tuple(Rel(int(t)) for t in LinkTag)
SELF_LOOP_RELATIONS = (Rel.QQ_DIST_0, Rel.SELF_TABLE, Rel.SELF_COLUMN)

_EDGE_TO_REL = {
    EdgeLabel.BELONGS_TO: Rel.BELONGS_TO,
    EdgeLabel.HAS_COLUMN: Rel.HAS_COLUMN,
    EdgeLabel.FOREIGN_KEY_FORWARD: Rel.FK_FORWARD,
    EdgeLabel.FOREIGN_KEY_BACKWARD: Rel.FK_BACKWARD,
    EdgeLabel.PRIMARY_KEY: Rel.PRIMARY_KEY,
    EdgeLabel.PRIMARY_KEY_OF: Rel.PRIMARY_KEY_OF,
}

# higher wins when several edges land in one cell
_EDGE_RANK = {
    Rel.PRIMARY_KEY: 3,
    Rel.PRIMARY_KEY_OF: 3,
    Rel.FK_FORWARD: 2,
    Rel.FK_BACKWARD: 1,
    Rel.BELONGS_TO: 1,
    Rel.HAS_COLUMN: 1,
    Rel.TABLE_FK_FORWARD: 2,
    Rel.TABLE_FK_BACKWARD: 1,
}


def link_relation(tag: int) -> Rel:
    return Rel(int(tag))


def question_distance_relation(i: int, j: int) -> Rel:
    return Rel(int(Rel.QQ_DIST_0) + max(-2, min(2, j - i)))


def schema_relations(graph: SchemaGraph) -> np.ndarray:
    """m x m block of schema-to-schema relation ids."""
    m = graph.num_nodes
    types = np.array(graph.node_types())
    block = np.where(
        types[:, None] == types[None, :], int(Rel.NO_EDGE_SAME_TYPE), int(Rel.NO_EDGE_CROSS_TYPE)
    ).astype(np.int64)
    rank = np.zeros((m, m), dtype=np.int64)

    def put(src: int, dst: int, rel: Rel) -> None:
        if _EDGE_RANK[rel] > rank[src, dst]:
            block[src, dst] = int(rel)
            rank[src, dst] = _EDGE_RANK[rel]

    for src, label, dst in graph.edges:
        rel = _EDGE_TO_REL.get(EdgeLabel(label))
        if rel is not None and src != dst:
            put(src, dst, rel)
    for c_src, c_dst in graph.foreign_keys:
        t_src, t_dst = graph.column_tables[c_src], graph.column_tables[c_dst]
        if t_src is None or t_dst is None or t_src == t_dst:
            continue
        put(t_src, t_dst, Rel.TABLE_FK_FORWARD)
        put(t_dst, t_src, Rel.TABLE_FK_BACKWARD)
    for j in range(m):
        block[j, j] = int(Rel.SELF_TABLE if graph.is_table(j) else Rel.SELF_COLUMN)
    return block


def build_relation_matrix(question: Sequence[str], graph: SchemaGraph, link: np.ndarray) -> np.ndarray:
    n, m = len(question), graph.num_nodes
    link = np.asarray(link)
    if link.shape != (n, m):
        raise ValueError(f"link matrix shape {link.shape} does not match question/schema ({n}, {m})")
    out = np.empty((n + m, n + m), dtype=np.int64)
    idx = np.arange(n)
    out[:n, :n] = int(Rel.QQ_DIST_0) + np.clip(idx[None, :] - idx[:, None], -2, 2)
    # link tags and link relation ids share numbering
    out[:n, n:] = link
    out[n:, :n] = link.T
    out[n:, n:] = schema_relations(graph)
    return out
