"""Templated question/SQL pairs over the bundled desk schemas.

Every template pairs a question pattern with a SQL pattern; slots are filled
with schema names chosen by a seeded generator.  The default 50-example
corpus exercises every grammar production.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from ..schema.graph import SchemaGraph

_ID_SUFFIX = "_id"


@dataclass(frozen=True)
class _Table:
    name: str
    words: str
    text: tuple[tuple[str, str], ...]  # (original, words)
    num: tuple[tuple[str, str], ...]


def _tables(graph: SchemaGraph) -> list[_Table]:
    out = []
    for t in range(graph.num_tables):
        text, num = [], []
        for c in graph.table_columns(t):
            orig = graph.column_names_original[c]
            words = " ".join(graph.column_names[c])
            if orig.lower().endswith(_ID_SUFFIX) or orig.lower() in ("team",):
                continue
            (num if graph.column_types[c] == "number" else text).append((orig, words))
        out.append(_Table(graph.table_names_original[t], " ".join(graph.table_names[t]), tuple(text), tuple(num)))
    return out


def _fk_pairs(graph: SchemaGraph) -> list[tuple[str, str, str, str]]:
    """(child table, child column, parent table, parent column) per foreign key."""
    out = []
    for a, b in graph.foreign_keys:
        ta, tb = graph.column_tables[a], graph.column_tables[b]
        out.append((
            graph.table_names_original[ta], graph.column_names_original[a],
            graph.table_names_original[tb], graph.column_names_original[b],
        ))
    return out


class _Filler:
    def __init__(self, graph: SchemaGraph, rng: np.random.Generator):
        self.graph = graph
        self.rng = rng
        self.tables = _tables(graph)

    def pick(self, items):
        items = list(items)
        return items[int(self.rng.integers(len(items)))]

    def table(self, text: int = 0, num: int = 0) -> _Table:
        ok = [t for t in self.tables if len(t.text) >= text and len(t.num) >= num]
        if not ok:
            raise LookupError(f"{self.graph.db_id}: no table with {text} text and {num} numeric columns")
        return self.pick(ok)

    def cols(self, pool, k: int):
        idx = self.rng.permutation(len(pool))[:k]
        return [pool[i] for i in sorted(idx)]

    def number(self) -> int:
        return int(self.rng.integers(2, 60))

    def word(self) -> str:
        return self.pick(["alpha", "beta", "gamma", "delta", "omega"])


Template = Callable[[_Filler], tuple[str, str]]


def _t_select(f):
    t = f.table(text=1)
    (c, cw), = f.cols(t.text, 1)
    return f"show the {cw} of every {t.words}", f"SELECT {c} FROM {t.name}"


def _t_select_two(f):
    t = f.table(text=1, num=1)
    (c, cw), (n, nw) = f.cols(t.text, 1)[0], f.cols(t.num, 1)[0]
    return f"show the {cw} and {nw} of every {t.words}", f"SELECT {c}, {n} FROM {t.name}"


def _t_distinct(f):
    t = f.table(text=1)
    (c, cw), = f.cols(t.text, 1)
    return f"list the distinct {cw} values of {t.words}", f"SELECT DISTINCT {c} FROM {t.name}"


def _t_count(f):
    t = f.table()
    return f"how many {t.words} rows are there", f"SELECT count(*) FROM {t.name}"


def _agg(name: str, phrase: str) -> Template:
    def make(f):
        t = f.table(num=1)
        (n, nw), = f.cols(t.num, 1)
        return f"what is the {phrase} {nw} of {t.words}", f"SELECT {name}({n}) FROM {t.name}"

    return make


def _t_count_distinct(f):
    t = f.table(text=1)
    (c, cw), = f.cols(t.text, 1)
    return f"how many different {cw} values appear in {t.words}", f"SELECT count(DISTINCT {c}) FROM {t.name}"


def _cmp(op: str, phrase: str) -> Template:
    def make(f):
        t = f.table(text=1, num=1)
        (c, cw), (n, nw) = f.cols(t.text, 1)[0], f.cols(t.num, 1)[0]
        v = f.number()
        return (
            f"which {cw} of {t.words} have {nw} {phrase} {v}",
            f"SELECT {c} FROM {t.name} WHERE {n} {op} {v}",
        )

    return make


def _text_cmp(op: str, phrase: str, pattern: str) -> Template:
    def make(f):
        t = f.table(text=1)
        (c, cw), = f.cols(t.text, 1)
        w = f.word()
        value = pattern.format(w)
        return f"which {cw} of {t.words} {phrase} {w}", f"SELECT {c} FROM {t.name} WHERE {c} {op} '{value}'"

    return make


def _between(negate: bool) -> Template:
    def make(f):
        t = f.table(text=1, num=1)
        (c, cw), (n, nw) = f.cols(t.text, 1)[0], f.cols(t.num, 1)[0]
        lo = f.number()
        hi = lo + f.number()
        phrase = "outside" if negate else "between"
        op = "NOT BETWEEN" if negate else "BETWEEN"
        return (
            f"which {cw} of {t.words} have {nw} {phrase} {lo} and {hi}",
            f"SELECT {c} FROM {t.name} WHERE {n} {op} {lo} AND {hi}",
        )

    return make


def _t_and(f):
    t = f.table(text=1, num=1)
    (c, cw), (n, nw) = f.cols(t.text, 1)[0], f.cols(t.num, 1)[0]
    v, w = f.number(), f.word()
    return (
        f"which {cw} of {t.words} have {nw} above {v} while {cw} is {w}",
        f"SELECT {c} FROM {t.name} WHERE {n} > {v} AND {c} = '{w}'",
    )


def _t_or(f):
    t = f.table(text=1, num=1)
    (c, cw), (n, nw) = f.cols(t.text, 1)[0], f.cols(t.num, 1)[0]
    lo = f.number()
    hi = lo + f.number()
    return (
        f"which {cw} of {t.words} have {nw} either under {lo} or over {hi}",
        f"SELECT {c} FROM {t.name} WHERE {n} < {lo} OR {n} > {hi}",
    )


def _membership(negate: bool) -> Template:
    def make(f):
        child, fk, parent, pk = f.pick(_fk_pairs(f.graph))
        pt = next(t for t in f.tables if t.name == parent)
        ct = next(t for t in f.tables if t.name == child)
        (c, cw), = f.cols(pt.text, 1)
        phrase = "without any" if negate else "with some"
        op = "NOT IN" if negate else "IN"
        return (
            f"find the {cw} of {pt.words} {phrase} {ct.words}",
            f"SELECT {c} FROM {parent} WHERE {pk} {op} (SELECT {fk} FROM {child})",
        )

    return make


def _t_above_average(f):
    t = f.table(text=1, num=1)
    (c, cw), (n, nw) = f.cols(t.text, 1)[0], f.cols(t.num, 1)[0]
    return (
        f"which {cw} of {t.words} have {nw} above the average {nw}",
        f"SELECT {c} FROM {t.name} WHERE {n} > (SELECT avg({n}) FROM {t.name})",
    )


def _t_column_value(f):
    t = f.table(text=1, num=2)
    (c, cw) = f.cols(t.text, 1)[0]
    (n, nw), (n2, n2w) = f.cols(t.num, 2)
    return (
        f"which {cw} of {t.words} have {nw} equal to their own {n2w}",
        f"SELECT {c} FROM {t.name} WHERE {n} = {n2}",
    )


def _t_group(f):
    t = f.table(text=1)
    (c, cw), = f.cols(t.text, 1)
    return (
        f"count the {t.words} rows for each {cw}",
        f"SELECT {c}, count(*) FROM {t.name} GROUP BY {c}",
    )


def _t_group_two(f):
    t = f.table(text=1, num=1)
    (c, cw), (n, nw) = f.cols(t.text, 1)[0], f.cols(t.num, 1)[0]
    return (
        f"count the {t.words} rows for each pair of {cw} and {nw}",
        f"SELECT {c}, {n}, count(*) FROM {t.name} GROUP BY {c}, {n}",
    )


def _t_having(f):
    t = f.table(text=1)
    (c, cw), = f.cols(t.text, 1)
    v = f.number()
    return (
        f"which {cw} occur in more than {v} {t.words} rows",
        f"SELECT {c} FROM {t.name} GROUP BY {c} HAVING count(*) > {v}",
    )


def _order(direction: str, phrase: str, limit: bool) -> Template:
    def make(f):
        t = f.table(text=1, num=1)
        (c, cw), (n, nw) = f.cols(t.text, 1)[0], f.cols(t.num, 1)[0]
        if limit:
            return (
                f"which {cw} of {t.words} has the {phrase} {nw}",
                f"SELECT {c} FROM {t.name} ORDER BY {n} {direction} LIMIT 1",
            )
        return (
            f"list the {cw} of {t.words} sorted by {nw} in {phrase} order",
            f"SELECT {c} FROM {t.name} ORDER BY {n} {direction}",
        )

    return make


def _t_order_two(f):
    t = f.table(text=1, num=2)
    (c, cw) = f.cols(t.text, 1)[0]
    (n, nw), (n2, n2w) = f.cols(t.num, 2)
    return (
        f"list the {cw} of {t.words} sorted by {nw} then by {n2w} descending",
        f"SELECT {c} FROM {t.name} ORDER BY {n}, {n2} DESC",
    )


def _t_limit(f):
    t = f.table(text=1)
    (c, cw), = f.cols(t.text, 1)
    k = int(f.rng.integers(2, 9))
    return f"show only {k} {cw} entries of {t.words}", f"SELECT {c} FROM {t.name} LIMIT {k}"


def _t_join(f):
    child, fk, parent, pk = f.pick(_fk_pairs(f.graph))
    pt = next(t for t in f.tables if t.name == parent)
    ct = next(t for t in f.tables if t.name == child)
    pool = ct.text or ct.num
    (c, cw), = f.cols(pt.text, 1)
    (c2, c2w), = f.cols(pool, 1)
    return (
        f"show each {ct.words} {c2w} together with the {cw} of its {pt.words}",
        f"SELECT T1.{c}, T2.{c2} FROM {parent} AS T1 JOIN {child} AS T2 ON T1.{pk} = T2.{fk}",
    )


def _set_op(op: str) -> Template:
    phrase = {"INTERSECT": "both", "UNION": "either", "EXCEPT": "only"}[op]

    def make(f):
        t = f.table(text=1, num=1)
        (c, cw), (n, nw) = f.cols(t.text, 1)[0], f.cols(t.num, 1)[0]
        lo = f.number()
        hi = lo + f.number()
        return (
            f"{phrase} set of {cw} of {t.words} with {nw} over {lo} against {nw} under {hi}",
            f"SELECT {c} FROM {t.name} WHERE {n} > {lo} {op} SELECT {c} FROM {t.name} WHERE {n} < {hi}",
        )

    return make


def _arith(op: str, phrase: str) -> Template:
    def make(f):
        t = f.table(num=2)
        (n, nw), (n2, n2w) = f.cols(t.num, 2)
        return f"compute the {phrase} of {nw} and {n2w} for each {t.words}", f"SELECT {n} {op} {n2} FROM {t.name}"

    return make


def _t_from_subquery(f):
    t = f.table(text=1)
    (c, cw), = f.cols(t.text, 1)
    return (
        f"how many groups result from grouping {t.words} by {cw}",
        f"SELECT count(*) FROM (SELECT {c} FROM {t.name} GROUP BY {c})",
    )


TEMPLATES: tuple[Template, ...] = (
    _t_select, _t_select_two, _t_distinct, _t_count,
    _agg("max", "largest"), _agg("min", "smallest"), _agg("avg", "average"), _agg("sum", "total"),
    _t_count_distinct,
    _cmp("=", "exactly"), _cmp("!=", "different from"), _cmp("<", "below"), _cmp(">", "above"),
    _cmp("<=", "at most"), _cmp(">=", "at least"),
    _text_cmp("LIKE", "contains", "%{}%"), _text_cmp("NOT LIKE", "lacks", "%{}%"),
    _between(False), _between(True), _t_and, _t_or,
    _membership(False), _membership(True), _t_above_average, _t_column_value,
    _t_group, _t_group_two, _t_having,
    _order("ASC", "ascending", False), _order("DESC", "descending", False),
    _order("ASC", "lowest", True), _order("DESC", "highest", True),
    _t_order_two, _t_limit, _t_join,
    _set_op("INTERSECT"), _set_op("UNION"), _set_op("EXCEPT"),
    _arith("-", "difference"), _arith("+", "sum"), _arith("*", "product"), _arith("/", "ratio"),
    _t_from_subquery,
)


def synthetic_corpus(
    schemas: Mapping[str, SchemaGraph], size: int = 50, seed: int = 0, db_ids: Optional[list] = None
) -> list[dict]:
    """``size`` Spider-style records (``db_id``, ``question``, ``query``).

    Templates are used round-robin and schemas rotate, so the first
    ``len(TEMPLATES)`` records already cover every template.
    """
    rng = np.random.default_rng(seed)
    ids = list(db_ids or sorted(schemas))
    out: list[dict] = []
    seen: set[str] = set()
    k = 0
    while len(out) < size:
        if k > 50 * size:
            raise RuntimeError("could not generate enough distinct examples")
        template = TEMPLATES[k % len(TEMPLATES)]
        start = k + k // len(TEMPLATES)
        k += 1
        # rotate schemas; a schema lacking the needed columns passes to the next
        for shift in range(len(ids)):
            graph = schemas[ids[(start + shift) % len(ids)]]
            try:
                question, query = template(_Filler(graph, rng))
                break
            except LookupError:
                continue
        else:
            continue
        if question in seen:
            continue
        seen.add(question)
        out.append({"db_id": graph.db_id, "question": question, "query": query})
    return out
