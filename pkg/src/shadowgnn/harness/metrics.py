"""Exact match, Spider-style hardness buckets and component match."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from ..grammar.ast import ColumnRef, Literal, Node, TableRef
from ..grammar.canonical import equivalent
from ..grammar.rules import SET_OPS
from ..schema.graph import SchemaGraph

HARDNESS = ("easy", "medium", "hard", "extra")
COMPONENTS = (
    "select", "select_no_agg", "where", "where_no_op", "group_no_having", "group",
    "order", "and_or", "iuen", "keywords",
)
_NEGATED = ("not_in", "not_like", "not_between")


def exact_match(pred_sql: Optional[str], gold_sql: str, graph: SchemaGraph) -> bool:
    """Canonical equality with literal values masked; ``None`` predictions never match."""
    return pred_sql is not None and equivalent(pred_sql, gold_sql, graph, keep_values=False)


# -- tree views ---------------------------------------------------------------


def _chain(node: Node) -> list:
    """Items of a one/more cons list (the last child continues the list)."""
    items = []
    while True:
        items.extend(node.children[:-1] if node.name == "more" else node.children)
        if node.name != "more":
            return items
        node = node.children[-1]


def _filters(node: Optional[Node]) -> tuple[list[Node], list[str]]:
    """Leaf conditions and the and/or connectors of a Filter tree."""
    if node is None:
        return [], []
    if node.name in ("and", "or"):
        left, lc = _filters(node.children[0])
        right, rc = _filters(node.children[1])
        return left + right, lc + [node.name] + rc
    return [node], []


def text(item, values: bool = False) -> str:
    """Compact rendering of a subtree; literals print as ``value`` unless ``values``."""
    if isinstance(item, ColumnRef):
        return f"c{item.node}"
    if isinstance(item, TableRef):
        return f"t{item.node}"
    if isinstance(item, Literal):
        return item.text if values else "value"
    if not item.children:
        return f"{item.head}.{item.name}"
    return f"{item.head}.{item.name}(" + ",".join(text(c, values) for c in item.children) + ")"


@dataclass
class QueryView:
    """Spider-like fields of the first query of a statement."""

    select: list
    distinct: bool
    tables: int
    from_subquery: Optional[Node]
    where: list
    where_ops: list
    group: list
    having: list
    having_ops: list
    order: Optional[str]
    order_items: list
    limit: bool
    set_op: Optional[str]
    set_rhs: Optional[Node]

    @classmethod
    def of(cls, statement: Node) -> "QueryView":
        query = statement.children[0]
        select, from_, where, group, order = query.children
        tables, sub = 0, None
        if from_.name == "tables":
            tables = len(_chain(from_.children[0]))
        else:
            sub = from_.children[0]
        where_leaves, where_ops = _filters(where.children[0] if where.name == "where" else None)
        group_cols, having, having_ops = [], [], []
        if group.name != "none":
            group_cols = _chain(group.children[0])
        if group.name == "group_by_having":
            having, having_ops = _filters(group.children[1])
        direction = None
        items: list = []
        if order.name in ("asc", "desc", "asc_limit", "desc_limit"):
            direction = order.name.split("_")[0]
            items = _chain(order.children[0])
        return cls(
            select=_chain(select.children[0]),
            distinct=select.name == "select_distinct",
            tables=tables,
            from_subquery=sub,
            where=where_leaves,
            where_ops=where_ops,
            group=group_cols,
            having=having,
            having_ops=having_ops,
            order=direction,
            order_items=items,
            limit=order.name in ("asc_limit", "desc_limit", "limit"),
            set_op=statement.name if statement.name in SET_OPS else None,
            set_rhs=statement.children[1] if statement.name in SET_OPS else None,
        )


# -- hardness -----------------------------------------------------------------


def _operand_has_agg(op: Node) -> bool:
    return op.children[0].name != "none"


def _nested(view: QueryView) -> int:
    count = 0
    for cond in view.where + view.having:
        count += sum(1 for v in cond.children[1:] if v.name == "subquery")
    return count + (view.set_op is not None)


def hardness(tree: Node) -> str:
    """Spider's difficulty rules, applied to the first query of the statement."""
    v = QueryView.of(tree)
    c1 = (
        bool(v.where) + bool(v.group) + (v.order is not None) + v.limit
        + max(v.tables - 1, 0)
        + (v.where_ops + v.having_ops).count("or")
        + sum(c.name in ("like", "not_like") for c in v.where + v.having)
    )
    c2 = _nested(v)
    # Spider's aggregate count reads slot 0 of each unit: for conditions that
    # slot is the NOT flag and for order items it is the arithmetic operator
    aggs = (
        sum(_operand_has_agg(op) for op in v.select)
        + sum(c.name in _NEGATED for c in v.where + v.having)
        + sum(op.children[1].name != "col" for op in v.order_items)
    )
    others = (aggs > 1) + (len(v.select) > 1) + (len(v.where) > 1) + (len(v.group) > 1)
    if c1 <= 1 and others == 0 and c2 == 0:
        return "easy"
    if (others <= 2 and c1 <= 1 and c2 == 0) or (c1 <= 2 and others < 2 and c2 == 0):
        return "medium"
    if (others > 2 and c1 <= 2 and c2 == 0) or (2 < c1 <= 3 and others <= 2 and c2 == 0) or (
        c1 <= 1 and others == 0 and c2 <= 1
    ):
        return "hard"
    return "extra"


# -- component match ------------------------------------------------------------


def _cond(cond: Node, with_op: bool) -> str:
    parts = [text(cond.children[0])] + [text(v) for v in cond.children[1:]]
    return (cond.name + ":" if with_op else "") + "|".join(parts)


def components(tree: Node) -> dict[str, tuple]:
    """Order-insensitive per-clause signatures, values masked."""
    v = QueryView.of(tree)
    sel = sorted(text(op) for op in v.select)
    sel_no_agg = sorted(text(op.children[1]) for op in v.select)
    keywords = set()
    if v.where:
        keywords.add("where")
    if v.group:
        keywords.add("group")
    if v.having:
        keywords.add("having")
    if v.order:
        keywords.add("order")
    if v.limit:
        keywords.add("limit")
    if v.set_op:
        keywords.add(v.set_op)
    if v.distinct:
        keywords.add("distinct")
    for c in v.where + v.having:
        if c.name in _NEGATED:
            keywords.add("not")
        if c.name in ("in", "not_in"):
            keywords.add("in")
        if c.name in ("like", "not_like"):
            keywords.add("like")
    if "or" in v.where_ops + v.having_ops:
        keywords.add("or")
    return {
        "select": (v.distinct, tuple(sel)),
        "select_no_agg": (v.distinct, tuple(sel_no_agg)),
        "where": tuple(sorted(_cond(c, True) for c in v.where)),
        "where_no_op": tuple(sorted(_cond(c, False) for c in v.where)),
        "group_no_having": tuple(sorted(text(c) for c in v.group)),
        "group": (tuple(sorted(text(c) for c in v.group)), tuple(sorted(_cond(c, True) for c in v.having))),
        "order": (v.order, tuple(text(op) for op in v.order_items), v.limit),
        "and_or": tuple(sorted(set(v.where_ops + v.having_ops))),
        "iuen": (v.set_op, text(v.set_rhs) if v.set_rhs is not None else None),
        "keywords": tuple(sorted(keywords)),
    }


# -- reports ------------------------------------------------------------------


@dataclass
class EvalReport:
    exact_match: float
    total: int
    hardness_counts: dict = field(default_factory=dict)
    hardness_accuracy: dict = field(default_factory=dict)
    component_accuracy: dict = field(default_factory=dict)
    recover_rate: Optional[float] = None
    unscored: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Scored:
    """One evaluated example."""

    gold_sql: str
    pred_sql: Optional[str]
    graph: SchemaGraph
    gold_tree: Optional[Node] = None
    pred_tree: Optional[Node] = None


def build_report(items: Sequence[Scored], recover_rate: Optional[float] = None) -> EvalReport:
    """Aggregate exact match, hardness buckets and component accuracy.

    Gold queries outside the grammar have no tree; they count toward exact
    match (and can only match if the prediction is textually equivalent) and
    land in the ``extra`` bucket.
    """
    items = list(items)
    if not items:
        raise ValueError("cannot evaluate an empty corpus")
    hits = [exact_match(it.pred_sql, it.gold_sql, it.graph) for it in items]
    counts = {h: 0 for h in HARDNESS}
    correct = {h: 0 for h in HARDNESS}
    comp_hits = {c: 0 for c in COMPONENTS}
    scored = 0
    for it, hit in zip(items, hits):
        bucket = hardness(it.gold_tree) if it.gold_tree is not None else "extra"
        counts[bucket] += 1
        correct[bucket] += hit
        if it.gold_tree is None:
            continue
        scored += 1
        gold = components(it.gold_tree)
        pred = components(it.pred_tree) if it.pred_tree is not None else {}
        for c in COMPONENTS:
            comp_hits[c] += pred.get(c) == gold[c]
    return EvalReport(
        exact_match=sum(hits) / len(items),
        total=len(items),
        hardness_counts=counts,
        hardness_accuracy={h: (correct[h] / counts[h] if counts[h] else None) for h in HARDNESS},
        component_accuracy={c: (comp_hits[c] / scored if scored else None) for c in COMPONENTS},
        recover_rate=recover_rate,
        unscored=len(items) - scored,
    )
