"""SemQL trees, action sequences and the grammar cursor."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Union

from .rules import (
    COLUMN_SLOT,
    LITERAL_SLOT,
    RULES,
    ROOT,
    TABLE_SLOT,
    Rule,
    is_terminal,
    min_lengths,
    rule,
    rules_for,
)


class GrammarError(ValueError):
    pass


class IncompleteSequence(GrammarError):
    """The action sequence ended before the tree was complete."""


class GrammarViolation(GrammarError):
    """An action is not allowed by the production table at its position."""


@dataclass(frozen=True)
class ColumnRef:
    node: int


@dataclass(frozen=True)
class TableRef:
    node: int


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class Node:
    rule: int
    children: tuple = ()

    @property
    def spec(self) -> Rule:
        return RULES[self.rule]

    @property
    def head(self) -> str:
        return RULES[self.rule].head

    @property
    def name(self) -> str:
        return RULES[self.rule].name

    def walk(self) -> Iterator["Node"]:
        yield self
        for child in self.children:
            if isinstance(child, Node):
                yield from child.walk()


Child = Union[Node, ColumnRef, TableRef, Literal]


def make(head: str, name: str, *children: Child) -> Node:
    r = rule(head, name)
    if len(children) != len(r.children):
        raise GrammarViolation(f"{r} expects {len(r.children)} children, got {len(children)}")
    for slot, child in zip(r.children, children):
        _check_child(slot, child, r)
    return Node(r.id, tuple(children))


def _check_child(slot: str, child: Child, r: Rule) -> None:
    ok = (
        (slot == COLUMN_SLOT and isinstance(child, ColumnRef))
        or (slot == TABLE_SLOT and isinstance(child, TableRef))
        or (slot == LITERAL_SLOT and isinstance(child, Literal))
        or (isinstance(child, Node) and child.head == slot)
    )
    if not ok:
        raise GrammarViolation(f"child {child!r} does not fit slot {slot} of {r}")


# ---------------------------------------------------------------------------
# actions


@dataclass(frozen=True)
class ApplyRule:
    rule: int

    def __str__(self) -> str:
        r = RULES[self.rule]
        return f"{r.head}.{r.name}"


@dataclass(frozen=True)
class SelectColumn:
    node: int

    def __str__(self) -> str:
        return f"C({self.node})"


@dataclass(frozen=True)
class SelectTable:
    node: int

    def __str__(self) -> str:
        return f"T({self.node})"


@dataclass(frozen=True)
class EmitLiteral:
    token: str

    def __str__(self) -> str:
        return f"L({self.token})"


Action = Union[ApplyRule, SelectColumn, SelectTable, EmitLiteral]


def flatten(tree: Node) -> list[Action]:
    """Depth-first pre-order action sequence."""
    out: list[Action] = []
    stack: list[Child] = [tree]
    while stack:
        item = stack.pop()
        if isinstance(item, Node):
            out.append(ApplyRule(item.rule))
            stack.extend(reversed(item.children))
        elif isinstance(item, ColumnRef):
            out.append(SelectColumn(item.node))
        elif isinstance(item, TableRef):
            out.append(SelectTable(item.node))
        else:
            out.append(EmitLiteral(item.text))
    return out


def action_fits(slot: str, action: Action) -> bool:
    if slot == COLUMN_SLOT:
        return isinstance(action, SelectColumn)
    if slot == TABLE_SLOT:
        return isinstance(action, SelectTable)
    if slot == LITERAL_SLOT:
        return isinstance(action, EmitLiteral)
    return isinstance(action, ApplyRule) and 0 <= action.rule < len(RULES) and RULES[action.rule].head == slot


def unflatten(actions: Sequence[Action], graph=None) -> Node:
    """Rebuild the tree; optionally check that node ids have the right type in ``graph``."""
    actions = list(actions)
    pos = 0

    def build(slot: str) -> Child:
        nonlocal pos
        if pos >= len(actions):
            raise IncompleteSequence(f"sequence ended at position {pos} while expecting {slot}")
        action = actions[pos]
        if not action_fits(slot, action):
            raise GrammarViolation(f"action {action} at position {pos} is illegal where {slot} is expected")
        pos += 1
        if isinstance(action, SelectColumn):
            if graph is not None and not (graph.num_tables <= action.node < graph.num_nodes):
                raise GrammarViolation(f"node {action.node} at position {pos - 1} is not a column")
            return ColumnRef(action.node)
        if isinstance(action, SelectTable):
            if graph is not None and not (0 <= action.node < graph.num_tables):
                raise GrammarViolation(f"node {action.node} at position {pos - 1} is not a table")
            return TableRef(action.node)
        if isinstance(action, EmitLiteral):
            return Literal(action.token)
        r = RULES[action.rule]
        return Node(r.id, tuple(build(child) for child in r.children))

    if not actions:
        raise IncompleteSequence("empty action sequence")
    tree = build(ROOT)
    if pos != len(actions):
        raise GrammarViolation(f"{len(actions) - pos} trailing actions after a complete tree")
    return tree


class Cursor:
    """Stack of pending slots while an action sequence is being produced."""

    __slots__ = ("stack", "length")

    def __init__(self, stack: Optional[list[str]] = None, length: int = 0):
        self.stack = [ROOT] if stack is None else stack
        self.length = length

    def copy(self) -> "Cursor":
        return Cursor(list(self.stack), self.length)

    @property
    def done(self) -> bool:
        return not self.stack

    @property
    def expected(self) -> str:
        if not self.stack:
            raise GrammarViolation("cursor is complete")
        return self.stack[-1]

    def pending_min_length(self) -> int:
        lengths = min_lengths()
        return sum(lengths[s] for s in self.stack)

    def legal_rules(self, max_length: Optional[int] = None) -> list[int]:
        """Rule ids allowed next; with ``max_length``, only rules that can still finish in time."""
        slot = self.expected
        if is_terminal(slot):
            return []
        candidates = rules_for(slot)
        if max_length is None:
            return [r.id for r in candidates]
        lengths = min_lengths()
        rest = self.pending_min_length() - lengths[slot]
        out = []
        for r in candidates:
            need = self.length + 1 + sum(lengths[c] for c in r.children) + rest
            if need <= max_length:
                out.append(r.id)
        return out

    def advance(self, action: Action) -> None:
        slot = self.expected
        if not action_fits(slot, action):
            raise GrammarViolation(f"action {action} is illegal where {slot} is expected")
        self.stack.pop()
        self.length += 1
        if isinstance(action, ApplyRule):
            self.stack.extend(reversed(RULES[action.rule].children))


def tree_to_str(tree: Child, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(tree, Node):
        lines = [f"{pad}{tree.head}.{tree.name}"]
        lines.extend(tree_to_str(c, indent + 1) for c in tree.children)
        return "\n".join(lines)
    return f"{pad}{tree}"
