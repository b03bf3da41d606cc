"""Canonical SQL strings for equivalence checks.

This module works on tokens only and never builds a SemQL tree, so it can
judge the parser/emitter pair from the outside.  Normalization steps:

* keywords and identifiers are lower-cased, string quotes become ``'``
* every column is written as ``table.column`` (aliases resolved)
* the FROM clause becomes the sorted table list plus sorted ON equalities
* top-level AND conjuncts of WHERE/HAVING are sorted when no OR is present
* ``AS`` aliases and ``ASC`` are dropped, ``<>`` becomes ``!=``
* with ``keep_values=False`` every literal is replaced by ``value``
"""
from __future__ import annotations

from typing import Iterable, Optional, Union

from ..schema.graph import SchemaGraph
from .lexer import SqlSyntaxError, Token, lex

_CLAUSES = ("select", "from", "where", "group", "having", "order", "limit")
_SET_OPS = ("intersect", "union", "except")
_AGGS = ("count", "max", "min", "sum", "avg")
_KEYWORDS = set(_CLAUSES) | set(_SET_OPS) | set(_AGGS) | {
    "distinct", "by", "and", "or", "not", "in", "like", "between", "asc", "desc",
    "as", "join", "on", "inner", "true", "false", "all",
}

Item = Union[Token, list]


def _group(tokens: list[Token]) -> list[Item]:
    root: list[Item] = []
    stack = [root]
    for tok in tokens:
        if tok.kind == "op" and tok.text == "(":
            child: list[Item] = []
            stack[-1].append(child)
            stack.append(child)
        elif tok.kind == "op" and tok.text == ")":
            if len(stack) == 1:
                raise SqlSyntaxError("unbalanced ')'")
            stack.pop()
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SqlSyntaxError("unbalanced '('")
    return root


def _is_kw(item: Item, *words: str) -> bool:
    return isinstance(item, Token) and item.is_kw(*words)


def _is_subquery(item: Item) -> bool:
    return isinstance(item, list) and bool(item) and _is_kw(item[0], "select")


def _split(items: list[Item], words: tuple) -> list[tuple[Optional[str], list[Item]]]:
    """Split at top-level keywords; each part carries the keyword that opened it."""
    parts: list[tuple[Optional[str], list[Item]]] = [(None, [])]
    for item in items:
        if _is_kw(item, *words):
            parts.append((item.lower, []))
        else:
            parts[-1][1].append(item)
    return parts


class _Canon:
    def __init__(self, graph: SchemaGraph, keep_values: bool):
        self.graph = graph
        self.keep_values = keep_values
        self.columns: dict[str, set[str]] = {}
        for c, owner in enumerate(graph.column_tables):
            if owner is not None:
                table = graph.table_names_original[owner].lower()
                self.columns.setdefault(table, set()).add(graph.column_names_original[c].lower())

    # -- statements -------------------------------------------------------
    def statement(self, items: list[Item], scopes: list) -> tuple[list[str], list[str]]:
        """Canonical tokens and the table list of the first query."""
        out: list[str] = []
        first_tables: list[str] = []
        for k, (op, part) in enumerate(_split(items, _SET_OPS)):
            if op is not None:
                out.append(op)
            if k == 0 and not part:
                raise SqlSyntaxError("empty statement")
            toks, tables = self.query(part, scopes)
            out.extend(toks)
            if k == 0:
                first_tables = tables
        return out, first_tables

    def query(self, items: list[Item], scopes: list) -> tuple[list[str], list[str]]:
        parts = _split(items, _CLAUSES)
        if parts[0][1]:
            raise SqlSyntaxError("query does not start with SELECT")
        clauses = dict(parts[1:])
        if "select" not in clauses or "from" not in clauses:
            raise SqlSyntaxError("query needs SELECT and FROM")
        from_toks, scope = self.from_clause(clauses["from"], scopes)
        inner = scopes + [scope]
        out = ["select"] + self.expr(clauses["select"], inner) + from_toks
        if "where" in clauses:
            out += ["where"] + self.condition(clauses["where"], inner)
        if "group" in clauses:
            out += ["group"] + self.expr(clauses["group"], inner)
        if "having" in clauses:
            out += ["having"] + self.condition(clauses["having"], inner)
        if "order" in clauses:
            out += ["order"] + [t for t in self.expr(clauses["order"], inner) if t != "asc"]
        if "limit" in clauses:
            out += ["limit"] + self.expr(clauses["limit"], inner)
        return out, scope["tables"]

    # -- FROM -------------------------------------------------------------
    def from_clause(self, items: list[Item], scopes: list) -> tuple[list[str], dict]:
        if items and isinstance(items[0], list):
            inner, tables = self.statement(items[0], scopes)
            return ["from", "("] + inner + [")"], {"aliases": {}, "tables": tables}
        aliases: dict[str, str] = {}
        tables: list[str] = []
        raw_conds: list[list[Item]] = []
        i = 0
        in_on = False
        while i < len(items):
            item = items[i]
            if _is_kw(item, "join", "inner") or (isinstance(item, Token) and item.text == ","):
                in_on = False
                i += 1
                continue
            if _is_kw(item, "on", "and"):
                in_on = True
                raw_conds.append([])
                i += 1
                continue
            if in_on:
                raw_conds[-1].append(item)
                i += 1
                continue
            if not isinstance(item, Token) or item.kind != "id":
                raise SqlSyntaxError(f"unexpected {item!r} in FROM")
            table = item.lower
            tables.append(table)
            aliases[table] = table
            i += 1
            if i < len(items) and _is_kw(items[i], "as"):
                i += 1
            nxt = items[i] if i < len(items) else None
            if isinstance(nxt, Token) and nxt.kind == "id" and nxt.lower not in _KEYWORDS:
                aliases[nxt.lower] = table
                i += 1
        scope = {"aliases": aliases, "tables": tables}
        conds = []
        for cond in raw_conds:
            sides = " ".join(self.expr(cond, scopes + [scope])).split(" = ")
            conds.append(" = ".join(sorted(s.strip() for s in sides)))
        out = ["from"] + " , ".join(sorted(tables)).split(" ")
        if conds:
            out += ["on"] + " and ".join(sorted(conds)).split(" ")
        return out, scope

    # -- expressions --------------------------------------------------------
    def column(self, qualifier: Optional[str], name: str, scopes: list) -> str:
        name = name.lower()
        if qualifier is not None:
            q = qualifier.lower()
            for scope in reversed(scopes):
                if q in scope["aliases"]:
                    return f"{scope['aliases'][q]}.{name}"
            return f"{q}.{name}"
        for scope in reversed(scopes):
            for table in scope["tables"]:
                if name in self.columns.get(table, ()):
                    return f"{table}.{name}"
        return name

    def literal(self, tok: Token) -> str:
        if not self.keep_values:
            return "value"
        if tok.kind == "str":
            body = tok.text[1:-1]
            if tok.text[0] == "'":
                body = body.replace("''", "'")
            return "'" + body.replace("'", "''") + "'"
        return tok.text

    def expr(self, items: list[Item], scopes: list) -> list[str]:
        out: list[str] = []
        i = 0
        while i < len(items):
            item = items[i]
            i += 1
            if isinstance(item, list):
                if _is_subquery(item):
                    inner, _ = self.statement(item, scopes)
                else:
                    inner = self.expr(item, scopes)
                out += ["("] + inner + [")"]
            elif item.kind in ("num", "str"):
                out.append(self.literal(item))
            elif item.kind == "op":
                out.append("!=" if item.text == "<>" else item.text)
            elif item.lower in _KEYWORDS:
                if item.lower in ("true", "false") and not self.keep_values:
                    out.append("value")
                else:
                    out.append(item.lower)
            elif (
                i + 1 < len(items)
                and isinstance(items[i], Token)
                and items[i].text == "."
                and isinstance(items[i + 1], Token)
            ):
                out.append(self.column(item.text, items[i + 1].text, scopes))
                i += 2
            else:
                out.append(self.column(None, item.text, scopes))
        return out

    def conjuncts(self, items: list[Item]) -> Optional[list[list[Item]]]:
        """Top-level AND operands, or None when an OR sits at this level."""
        parts: list[list[Item]] = [[]]
        in_between = False
        for item in items:
            if _is_kw(item, "or"):
                return None
            if _is_kw(item, "between"):
                in_between = True
            elif _is_kw(item, "and"):
                if in_between:
                    in_between = False
                else:
                    parts.append([])
                    continue
            parts[-1].append(item)
        out: list[list[Item]] = []
        for part in parts:
            if len(part) == 1 and isinstance(part[0], list) and not _is_subquery(part[0]):
                nested = self.conjuncts(part[0])
                if nested is not None:
                    out.extend(nested)
                    continue
            out.append(part)
        return out

    def condition(self, items: list[Item], scopes: list) -> list[str]:
        parts = self.conjuncts(items)
        if parts is None:
            return self.expr(items, scopes)
        texts = sorted(" ".join(self.expr(p, scopes)) for p in parts)
        return " and ".join(texts).split(" ")


def canonicalize(sql: str, graph: SchemaGraph, keep_values: bool = True) -> str:
    """Canonical string of ``sql``; raises SqlSyntaxError on malformed input."""
    tokens = lex(sql)
    if not tokens:
        raise SqlSyntaxError("empty query")
    out, _ = _Canon(graph, keep_values).statement(_group(tokens), [])
    return " ".join(out)


def equivalent(a: str, b: str, graph: SchemaGraph, keep_values: bool = True) -> bool:
    """Canonical-string equality; a string that fails to canonicalize equals nothing."""
    try:
        return canonicalize(a, graph, keep_values) == canonicalize(b, graph, keep_values)
    except SqlSyntaxError:
        return False


def roundtrip(sql: str, graph: SchemaGraph) -> str:
    from .emit import ast_to_sql
    from .parser import sql_to_ast

    return ast_to_sql(sql_to_ast(sql, graph), graph)


def recovers(sql: str, graph: SchemaGraph) -> bool:
    """Whether SQL -> tree -> SQL reproduces ``sql`` (values kept)."""
    try:
        return equivalent(sql, roundtrip(sql, graph), graph, keep_values=True)
    except ValueError:
        return False


def recover_rate(corpus: Iterable[tuple[str, SchemaGraph]]) -> float:
    """Fraction of ``(sql, graph)`` pairs that survive the roundtrip unchanged."""
    pairs = list(corpus)
    if not pairs:
        raise ValueError("recover_rate needs a non-empty corpus")
    return sum(recovers(sql, graph) for sql, graph in pairs) / len(pairs)
