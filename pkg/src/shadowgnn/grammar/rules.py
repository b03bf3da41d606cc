"""Production table of the SemQL grammar.

Each rule rewrites one non-terminal (``head``) into an ordered list of child
slots.  A slot is either another non-terminal or one of the terminal types
``C`` (schema column), ``T`` (schema table) and ``L`` (literal).  Every SQL
keyword of the supported subset owns a rule: aggregation functions are
``Agg`` rules, comparison operators are ``Filter`` rules, set operators are
``Statement`` rules, and so on.  Variable-length lists (select items, tables,
group-by columns, order items) use ``one`` / ``more`` cons rules.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

COLUMN_SLOT, TABLE_SLOT, LITERAL_SLOT = "C", "T", "L"
TERMINAL_SLOTS = (COLUMN_SLOT, TABLE_SLOT, LITERAL_SLOT)
ROOT = "Statement"


@dataclass(frozen=True)
class Rule:
    id: int
    head: str
    name: str
    children: tuple[str, ...]

    def __str__(self) -> str:
        rhs = " ".join(self.children) or "<empty>"
        return f"{self.head} -> {rhs}  [{self.name}]"


_SPEC = [
    ("Statement", "single", ("Query",)),
    ("Statement", "intersect", ("Query", "Statement")),
    ("Statement", "union", ("Query", "Statement")),
    ("Statement", "except", ("Query", "Statement")),
    ("Query", "query", ("Select", "From", "Where", "Group", "Order")),
    ("Select", "select", ("SelItems",)),
    ("Select", "select_distinct", ("SelItems",)),
    ("SelItems", "one", ("Operand",)),
    ("SelItems", "more", ("Operand", "SelItems")),
    ("Operand", "operand", ("Agg", "Expr")),
    ("Expr", "col", ("ColUnit",)),
    ("Expr", "minus", ("ColUnit", "ColUnit")),
    ("Expr", "plus", ("ColUnit", "ColUnit")),
    ("Expr", "times", ("ColUnit", "ColUnit")),
    ("Expr", "divide", ("ColUnit", "ColUnit")),
    ("ColUnit", "column", ("Agg", COLUMN_SLOT)),
    ("ColUnit", "distinct", ("Agg", COLUMN_SLOT)),
    ("Agg", "none", ()),
    ("Agg", "max", ()),
    ("Agg", "min", ()),
    ("Agg", "count", ()),
    ("Agg", "sum", ()),
    ("Agg", "avg", ()),
    ("From", "tables", ("Tables",)),
    ("From", "subquery", ("Statement",)),
    ("Tables", "one", (TABLE_SLOT,)),
    ("Tables", "more", (TABLE_SLOT, "Tables")),
    ("Where", "none", ()),
    ("Where", "where", ("Filter",)),
    ("Filter", "and", ("Filter", "Filter")),
    ("Filter", "or", ("Filter", "Filter")),
    ("Filter", "eq", ("Operand", "Value")),
    ("Filter", "ne", ("Operand", "Value")),
    ("Filter", "lt", ("Operand", "Value")),
    ("Filter", "gt", ("Operand", "Value")),
    ("Filter", "le", ("Operand", "Value")),
    ("Filter", "ge", ("Operand", "Value")),
    ("Filter", "like", ("Operand", "Value")),
    ("Filter", "not_like", ("Operand", "Value")),
    ("Filter", "in", ("Operand", "Value")),
    ("Filter", "not_in", ("Operand", "Value")),
    ("Filter", "between", ("Operand", "Value", "Value")),
    ("Filter", "not_between", ("Operand", "Value", "Value")),
    ("Value", "literal", (LITERAL_SLOT,)),
    ("Value", "subquery", ("Statement",)),
    ("Value", "column", ("ColUnit",)),
    ("Group", "none", ()),
    ("Group", "group_by", ("GroupCols",)),
    ("Group", "group_by_having", ("GroupCols", "Filter")),
    ("GroupCols", "one", (COLUMN_SLOT,)),
    ("GroupCols", "more", (COLUMN_SLOT, "GroupCols")),
    ("Order", "none", ()),
    ("Order", "asc", ("OrderItems",)),
    ("Order", "desc", ("OrderItems",)),
    ("Order", "asc_limit", ("OrderItems", LITERAL_SLOT)),
    ("Order", "desc_limit", ("OrderItems", LITERAL_SLOT)),
    ("Order", "limit", (LITERAL_SLOT,)),
    ("OrderItems", "one", ("Operand",)),
    ("OrderItems", "more", ("Operand", "OrderItems")),
]

RULES: tuple[Rule, ...] = tuple(Rule(i, head, name, kids) for i, (head, name, kids) in enumerate(_SPEC))
NONTERMINALS: tuple[str, ...] = tuple(dict.fromkeys(r.head for r in RULES))
_BY_NAME = {(r.head, r.name): r for r in RULES}
_BY_HEAD: dict[str, tuple[Rule, ...]] = {h: tuple(r for r in RULES if r.head == h) for h in NONTERMINALS}

AGG_NAMES = ("none", "max", "min", "count", "sum", "avg")
COMPARISON_OPS = {
    "eq": "=",
    "ne": "!=",
    "lt": "<",
    "gt": ">",
    "le": "<=",
    "ge": ">=",
    "like": "LIKE",
    "not_like": "NOT LIKE",
    "in": "IN",
    "not_in": "NOT IN",
}
ARITH_OPS = {"minus": "-", "plus": "+", "times": "*", "divide": "/"}
SET_OPS = ("intersect", "union", "except")


def rule(head: str, name: str) -> Rule:
    return _BY_NAME[(head, name)]


def rule_id(head: str, name: str) -> int:
    return _BY_NAME[(head, name)].id


def rules_for(head: str) -> tuple[Rule, ...]:
    return _BY_HEAD[head]


def is_terminal(slot: str) -> bool:
    return slot in TERMINAL_SLOTS


@lru_cache(maxsize=None)
def min_lengths() -> dict[str, int]:
    """Fewest actions needed to complete each slot kind (terminals cost 1)."""
    best = {t: 1 for t in TERMINAL_SLOTS}
    inf = float("inf")
    for nt in NONTERMINALS:
        best[nt] = inf
    changed = True
    while changed:
        changed = False
        for r in RULES:
            cost = 1 + sum(best[c] for c in r.children)
            if cost < best[r.head]:
                best[r.head] = cost
                changed = True
    return {k: int(v) for k, v in best.items()}


def rule_min_length(r: Rule) -> int:
    lengths = min_lengths()
    return 1 + sum(lengths[c] for c in r.children)


def describe() -> str:
    return "\n".join(f"{r.id:3d}  {r}" for r in RULES)
