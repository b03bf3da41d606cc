"""SemQL trees back to SQL text."""
from __future__ import annotations

from typing import Optional

from ..schema.graph import SchemaGraph
from .ast import ColumnRef, Node
from .parser import BindError
from .rules import ARITH_OPS, COMPARISON_OPS


def _items(node: Node) -> list:
    """Unroll a ``one``/``more`` cons list."""
    out = []
    while node.name == "more":
        out.append(node.children[0])
        node = node.children[1]
    out.append(node.children[0])
    return out


def join_conditions(graph: SchemaGraph, tables: list[int]) -> list[Optional[tuple[int, list[tuple[int, int]]]]]:
    """For every table after the first, the earliest previous table sharing a
    foreign key with it and the column pairs ``(prev_col, this_col)``."""
    out: list = [None]
    for k in range(1, len(tables)):
        found = None
        for p in range(k):
            pairs = []
            for a, b in graph.foreign_keys:
                ta, tb = graph.column_tables[a], graph.column_tables[b]
                if ta == tables[p] and tb == tables[k]:
                    pairs.append((a, b))
                elif tb == tables[p] and ta == tables[k]:
                    pairs.append((b, a))
            if pairs:
                found = (p, pairs)
                break
        out.append(found)
    return out


class _Emitter:
    def __init__(self, graph: SchemaGraph):
        self.graph = graph

    def check(self, ref, table: bool) -> int:
        g = self.graph
        if table:
            if not (0 <= ref.node < g.num_tables):
                raise BindError(f"{g.db_id}: node {ref.node} is not a table")
            return ref.node
        if not (g.num_tables <= ref.node < g.num_nodes):
            raise BindError(f"{g.db_id}: node {ref.node} is not a column")
        return ref.node - g.num_tables

    def statement(self, node: Node, scopes: list) -> str:
        query = self.query(node.children[0], scopes)
        if node.name == "single":
            return query
        return f"{query} {node.name.upper()} {self.statement(node.children[1], scopes)}"

    def query(self, node: Node, scopes: list) -> str:
        select, from_, where, group, order = node.children
        from_sql, scope = self.from_clause(from_, scopes)
        inner = scopes + [scope]
        parts = [self.select(select, inner), from_sql]
        if where.name == "where":
            parts.append("WHERE " + self.filter(where.children[0], inner))
        if group.name != "none":
            cols = ", ".join(self.column(c, inner) for c in _items(group.children[0]))
            parts.append("GROUP BY " + cols)
            if group.name == "group_by_having":
                parts.append("HAVING " + self.filter(group.children[1], inner))
        if order.name != "none":
            if order.name == "limit":
                parts.append("LIMIT " + order.children[0].text)
            else:
                items = ", ".join(self.operand(o, inner) for o in _items(order.children[0]))
                direction = " DESC" if order.name.startswith("desc") else ""
                parts.append("ORDER BY " + items + direction)
                if order.name.endswith("_limit"):
                    parts.append("LIMIT " + order.children[1].text)
        return " ".join(parts)

    def from_clause(self, node: Node, scopes: list) -> tuple[str, dict]:
        g = self.graph
        if node.name == "subquery":
            return f"FROM ({self.statement(node.children[0], scopes)})", {"derived": True}
        tables = [self.check(t, table=True) for t in _items(node.children[0])]
        if len(tables) == 1:
            return f"FROM {g.table_names_original[tables[0]]}", {tables[0]: None}
        if len(set(tables)) != len(tables):
            raise BindError(f"{g.db_id}: a table appears twice in FROM")
        alias = {t: f"T{i + 1}" for i, t in enumerate(tables)}
        parts = [f"FROM {g.table_names_original[tables[0]]} AS T1"]
        for k, link in enumerate(join_conditions(g, tables)):
            if k == 0:
                continue
            t = tables[k]
            text = f"JOIN {g.table_names_original[t]} AS {alias[t]}"
            if link is not None:
                p, pairs = link
                conds = [
                    f"{alias[tables[p]]}.{g.column_names_original[a]} = {alias[t]}.{g.column_names_original[b]}"
                    for a, b in pairs
                ]
                text += " ON " + " AND ".join(conds)
            parts.append(text)
        return " ".join(parts), alias

    def column(self, ref: ColumnRef, scopes: list) -> str:
        g = self.graph
        c = self.check(ref, table=False)
        owner = g.column_tables[c]
        name = g.column_names_original[c]
        if owner is None:
            return "*"
        for scope in reversed(scopes):
            if scope.get("derived"):
                if scope is scopes[-1]:
                    return name
                continue
            if owner in scope:
                alias = scope[owner]
                if alias is None:
                    return name if scope is scopes[-1] else f"{g.table_names_original[owner]}.{name}"
                return f"{alias}.{name}"
        return f"{g.table_names_original[owner]}.{name}"

    def col_unit(self, node: Node, scopes: list) -> str:
        agg, ref = node.children
        text = self.column(ref, scopes)
        if node.name == "distinct":
            text = "DISTINCT " + text
        return text if agg.name == "none" else f"{agg.name}({text})"

    def expr(self, node: Node, scopes: list) -> str:
        if node.name == "col":
            return self.col_unit(node.children[0], scopes)
        a, b = node.children
        return f"{self.col_unit(a, scopes)} {ARITH_OPS[node.name]} {self.col_unit(b, scopes)}"

    def operand(self, node: Node, scopes: list) -> str:
        agg, expr = node.children
        text = self.expr(expr, scopes)
        return text if agg.name == "none" else f"{agg.name}({text})"

    def select(self, node: Node, scopes: list) -> str:
        items = ", ".join(self.operand(o, scopes) for o in _items(node.children[0]))
        return ("SELECT DISTINCT " if node.name == "select_distinct" else "SELECT ") + items

    def value(self, node: Node, scopes: list) -> str:
        child = node.children[0]
        if node.name == "literal":
            return child.text
        if node.name == "subquery":
            return f"({self.statement(child, scopes)})"
        return self.col_unit(child, scopes)

    def filter(self, node: Node, scopes: list) -> str:
        if node.name in ("and", "or"):
            parts = []
            for child in node.children:
                text = self.filter(child, scopes)
                if node.name == "and" and child.name == "or":
                    text = f"({text})"
                parts.append(text)
            return f" {node.name.upper()} ".join(parts)
        left = self.operand(node.children[0], scopes)
        if node.name in ("between", "not_between"):
            low, high = (self.value(v, scopes) for v in node.children[1:])
            kw = "NOT BETWEEN" if node.name == "not_between" else "BETWEEN"
            return f"{left} {kw} {low} AND {high}"
        return f"{left} {COMPARISON_OPS[node.name]} {self.value(node.children[1], scopes)}"


def ast_to_sql(tree: Node, graph: SchemaGraph) -> str:
    """Deterministic SQL for a tree bound to ``graph``; joins come from foreign keys."""
    if tree.head != "Statement":
        raise ValueError(f"expected a Statement tree, got {tree.head}")
    return _Emitter(graph).statement(tree, [])

