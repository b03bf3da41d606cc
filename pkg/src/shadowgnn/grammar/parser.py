"""SQL (Spider subset) to SemQL trees."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..schema.graph import SchemaGraph
from .ast import ColumnRef, Literal, Node, TableRef, make
from .lexer import SqlSyntaxError, Token, lex
from .rules import AGG_NAMES, ARITH_OPS


class UnsupportedSql(ValueError):
    def __init__(self, construct: str):
        super().__init__(f"unsupported SQL construct: {construct}")
        self.construct = construct


class BindError(ValueError):
    pass


_CLAUSE_END = {"where", "group", "having", "order", "limit", "intersect", "union", "except"}
_CMP = {"=": "eq", "!=": "ne", "<>": "ne", "<": "lt", ">": "gt", "<=": "le", ">=": "ge"}
_ARITH = {sym: name for name, sym in ARITH_OPS.items()}
_AGGS = set(AGG_NAMES) - {"none"}
_UNSUPPORTED_WORDS = {
    "is": "IS",
    "exists": "EXISTS",
    "case": "CASE",
    "left": "LEFT JOIN",
    "right": "RIGHT JOIN",
    "outer": "OUTER JOIN",
    "cross": "CROSS JOIN",
    "natural": "NATURAL JOIN",
    "with": "WITH (CTE)",
    "over": "window function",
    "cast": "CAST",
    "null": "NULL",
}


@dataclass
class Scope:
    tables: list[int]
    aliases: dict[str, int]
    parent: Optional["Scope"] = None
    extra_tables: list[int] = field(default_factory=list)

    def chain(self):
        s = self
        while s is not None:
            yield s
            s = s.parent


class _Parser:
    def __init__(self, tokens: list[Token], graph: SchemaGraph):
        self.toks = tokens
        self.pos = 0
        self.graph = graph
        self._table_by_name = {name.lower(): t for t, name in enumerate(graph.table_names_original)}

    # -- token helpers --------------------------------------------------
    def peek(self, k: int = 0) -> Optional[Token]:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise SqlSyntaxError("unexpected end of query")
        self.pos += 1
        return tok

    def at_kw(self, *words: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok is not None and tok.is_kw(*words)

    def at_op(self, *ops: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok is not None and tok.kind == "op" and tok.text in ops

    def expect_kw(self, word: str) -> None:
        tok = self.next()
        if not tok.is_kw(word):
            raise SqlSyntaxError(f"expected {word.upper()}, found {tok.text!r}")

    def expect_op(self, op: str) -> None:
        tok = self.next()
        if tok.kind != "op" or tok.text != op:
            raise SqlSyntaxError(f"expected {op!r}, found {tok.text!r}")

    def check_unsupported(self) -> None:
        tok = self.peek()
        if tok is not None and tok.kind == "id" and tok.lower in _UNSUPPORTED_WORDS:
            raise UnsupportedSql(_UNSUPPORTED_WORDS[tok.lower])

    # -- statements -------------------------------------------------------
    def parse_statement(self, outer: Optional[Scope]) -> tuple[Node, Scope]:
        if self.at_op("("):
            raise UnsupportedSql("parenthesised set operand")
        query, scope = self.parse_query(outer)
        tok = self.peek()
        if tok is not None and tok.is_kw("intersect", "union", "except"):
            self.next()
            if self.at_kw("all"):
                raise UnsupportedSql(f"{tok.text.upper()} ALL")
            rest, _ = self.parse_statement(outer)
            return make("Statement", tok.lower, query, rest), scope
        return make("Statement", "single", query), scope

    def _find_from(self) -> int:
        depth = 0
        i = self.pos
        while i < len(self.toks):
            tok = self.toks[i]
            if tok.kind == "op" and tok.text == "(":
                depth += 1
            elif tok.kind == "op" and tok.text == ")":
                if depth == 0:
                    break
                depth -= 1
            elif depth == 0 and tok.is_kw("from"):
                return i
            elif depth == 0 and tok.is_kw(*_CLAUSE_END):
                break
            i += 1
        raise UnsupportedSql("SELECT without FROM")

    def parse_query(self, outer: Optional[Scope]) -> tuple[Node, Scope]:
        self.expect_kw("select")
        distinct = False
        if self.at_kw("distinct"):
            self.next()
            distinct = True
        select_start = self.pos
        from_at = self._find_from()
        self.pos = from_at
        from_node, scope = self.parse_from(outer)
        after_from = self.pos
        self.pos = select_start
        items = [self.parse_operand(scope)]
        while self.at_op(","):
            self.next()
            items.append(self.parse_operand(scope))
        if self.pos != from_at:
            raise SqlSyntaxError(f"unexpected {self.peek().text!r} in SELECT list")
        self.pos = after_from
        select = make("Select", "select_distinct" if distinct else "select", _cons("SelItems", items))

        where = make("Where", "none")
        if self.at_kw("where"):
            self.next()
            where = make("Where", "where", self.parse_or(scope))

        group = make("Group", "none")
        if self.at_kw("group"):
            self.next()
            self.expect_kw("by")
            cols = [ColumnRef(self.parse_column(scope))]
            while self.at_op(","):
                self.next()
                cols.append(ColumnRef(self.parse_column(scope)))
            group_cols = _cons("GroupCols", cols)
            if self.at_kw("having"):
                self.next()
                group = make("Group", "group_by_having", group_cols, self.parse_or(scope))
            else:
                group = make("Group", "group_by", group_cols)
        elif self.at_kw("having"):
            raise UnsupportedSql("HAVING without GROUP BY")

        order = make("Order", "none")
        if self.at_kw("order"):
            self.next()
            self.expect_kw("by")
            items, direction = [], "asc"
            while True:
                items.append(self.parse_operand(scope))
                explicit = None
                if self.at_kw("asc", "desc"):
                    explicit = self.next().lower
                if self.at_op(","):
                    if explicit is not None:
                        raise UnsupportedSql("per-item ORDER BY direction")
                    self.next()
                    continue
                direction = explicit or "asc"
                break
            order_items = _cons("OrderItems", items)
            if self.at_kw("limit"):
                self.next()
                order = make("Order", f"{direction}_limit", order_items, self.parse_limit())
            else:
                order = make("Order", direction, order_items)
        elif self.at_kw("limit"):
            self.next()
            order = make("Order", "limit", self.parse_limit())

        self.check_unsupported()
        tok = self.peek()
        if tok is not None and not (tok.is_kw("intersect", "union", "except") or (tok.kind == "op" and tok.text == ")")):
            raise UnsupportedSql(f"trailing token {tok.text!r}")
        return make("Query", "query", select, from_node, where, group, order), scope

    def parse_limit(self) -> Literal:
        tok = self.next()
        if tok.kind != "num":
            raise UnsupportedSql(f"LIMIT {tok.text}")
        return Literal(tok.text)

    # -- FROM -------------------------------------------------------------
    def parse_from(self, outer: Optional[Scope]) -> tuple[Node, Scope]:
        self.expect_kw("from")
        if self.at_op("("):
            self.next()
            inner, inner_scope = self.parse_statement(outer)
            self.expect_op(")")
            self._skip_alias()
            scope = Scope([], {}, outer, extra_tables=list(inner_scope.tables))
            if self.at_kw("join") or self.at_op(","):
                raise UnsupportedSql("join with a derived table")
            return make("From", "subquery", inner), scope
        scope = Scope([], {}, outer)
        self._table_ref(scope)
        pending_on = False
        while True:
            self.check_unsupported()
            if self.at_kw("join") or self.at_op(","):
                self.next()
                self._table_ref(scope)
                pending_on = True
            elif self.at_kw("inner") and self.at_kw("join", k=1):
                self.next()
                self.next()
                self._table_ref(scope)
                pending_on = True
            elif self.at_kw("on") and pending_on:
                self.next()
                self._join_condition(scope)
                while self.at_kw("and"):
                    self.next()
                    self._join_condition(scope)
                pending_on = False
            else:
                break
        tables = [TableRef(self.graph.table_node(t)) for t in scope.tables]
        return make("From", "tables", _cons("Tables", tables)), scope

    def _skip_alias(self) -> Optional[str]:
        if self.at_kw("as"):
            self.next()
            return self.next().text
        tok = self.peek()
        if tok is not None and tok.kind == "id" and not tok.is_kw(
            "join", "on", "where", "group", "having", "order", "limit", "intersect", "union", "except", "inner",
            *_UNSUPPORTED_WORDS,
        ):
            return self.next().text
        return None

    def _table_ref(self, scope: Scope) -> None:
        tok = self.next()
        if tok.kind == "op" and tok.text == "(":
            raise UnsupportedSql("join with a derived table")
        if tok.kind != "id":
            raise SqlSyntaxError(f"expected a table name, found {tok.text!r}")
        t = self._table_by_name.get(tok.lower)
        if t is None:
            raise BindError(f"{self.graph.db_id}: unknown table {tok.text!r}")
        if t in scope.tables:
            raise UnsupportedSql("self join")
        scope.tables.append(t)
        scope.aliases[tok.lower] = t
        alias = self._skip_alias()
        if alias is not None:
            scope.aliases[alias.lower()] = t

    def _join_condition(self, scope: Scope) -> None:
        self.parse_column(scope)
        self.expect_op("=")
        self.parse_column(scope)

    # -- expressions --------------------------------------------------------
    def parse_column(self, scope: Scope) -> int:
        tok = self.next()
        if tok.kind == "op" and tok.text == "*":
            return self.graph.star_node
        if tok.kind != "id":
            raise SqlSyntaxError(f"expected a column, found {tok.text!r}")
        if self.at_op("."):
            self.next()
            col = self.next()
            if col.kind == "op" and col.text == "*":
                raise UnsupportedSql("qualified *")
            return self._resolve_qualified(tok.text, col.text, scope)
        return self._resolve_bare(tok.text, scope)

    def _column_of(self, t: int, name: str) -> Optional[int]:
        name = name.lower()
        for c in self.graph.table_columns(t):
            if self.graph.column_names_original[c].lower() == name:
                return self.graph.column_node(c)
        return None

    def _resolve_qualified(self, qualifier: str, name: str, scope: Scope) -> int:
        q = qualifier.lower()
        for s in scope.chain():
            if q in s.aliases:
                node = self._column_of(s.aliases[q], name)
                if node is None:
                    raise BindError(f"{self.graph.db_id}: no column {name!r} in {qualifier!r}")
                return node
        raise BindError(f"{self.graph.db_id}: unknown table or alias {qualifier!r}")

    def _resolve_bare(self, name: str, scope: Scope) -> int:
        for s in scope.chain():
            for t in s.tables + s.extra_tables:
                node = self._column_of(t, name)
                if node is not None:
                    return node
        raise BindError(f"{self.graph.db_id}: cannot resolve column {name!r}")

    def _parse_term(self, scope: Scope) -> tuple[str, bool, int, Optional[tuple]]:
        """One aggregated or bare column: ``(agg, distinct, node, inner_arith)``."""
        self.check_unsupported()
        tok = self.peek()
        if tok is not None and tok.kind == "id" and tok.lower in _AGGS and self.at_op("(", k=1):
            agg = self.next().lower
            self.next()
            distinct = False
            if self.at_kw("distinct"):
                self.next()
                distinct = True
            node = self.parse_column(scope)
            inner = None
            if self.at_op(*_ARITH):
                op = _ARITH[self.next().text]
                other = self.parse_column(scope)
                if distinct:
                    raise UnsupportedSql("DISTINCT over arithmetic")
                inner = (op, node, other)
            self.expect_op(")")
            return agg, distinct, node, inner
        if tok is not None and tok.is_kw("distinct"):
            raise UnsupportedSql("DISTINCT inside a select item")
        if tok is not None and tok.kind == "op" and tok.text == "(":
            raise UnsupportedSql("parenthesised expression")
        return "none", False, self.parse_column(scope), None

    @staticmethod
    def _col_unit(agg: str, distinct: bool, node: int) -> Node:
        return make("ColUnit", "distinct" if distinct else "column", make("Agg", agg), ColumnRef(node))

    def parse_operand(self, scope: Scope) -> Node:
        agg, distinct, node, inner = self._parse_term(scope)
        if self.at_op(*_ARITH):
            op = _ARITH[self.next().text]
            agg2, distinct2, node2, inner2 = self._parse_term(scope)
            if inner is not None or inner2 is not None:
                raise UnsupportedSql("nested arithmetic")
            if self.at_op(*_ARITH):
                raise UnsupportedSql("chained arithmetic")
            expr = make("Expr", op, self._col_unit(agg, distinct, node), self._col_unit(agg2, distinct2, node2))
            return make("Operand", "operand", make("Agg", "none"), expr)
        if inner is not None:
            op, a, b = inner
            expr = make("Expr", op, self._col_unit("none", False, a), self._col_unit("none", False, b))
            return make("Operand", "operand", make("Agg", agg), expr)
        expr = make("Expr", "col", self._col_unit("none", distinct, node))
        return make("Operand", "operand", make("Agg", agg), expr)

    def parse_value(self, scope: Scope) -> Node:
        tok = self.peek()
        if tok is None:
            raise SqlSyntaxError("unexpected end of query in a condition")
        if tok.kind == "op" and tok.text == "(" and self.at_kw("select", k=1):
            self.next()
            sub, _ = self.parse_statement(scope)
            self.expect_op(")")
            return make("Value", "subquery", sub)
        if tok.kind in ("num", "str"):
            self.next()
            return make("Value", "literal", Literal(tok.text))
        if tok.kind == "op" and tok.text == "-" and self.peek(1) is not None and self.peek(1).kind == "num":
            self.next()
            return make("Value", "literal", Literal("-" + self.next().text))
        if tok.is_kw("true", "false"):
            self.next()
            return make("Value", "literal", Literal(tok.text))
        agg, distinct, node, inner = self._parse_term(scope)
        if inner is not None:
            raise UnsupportedSql("arithmetic value")
        return make("Value", "column", self._col_unit(agg, distinct, node))

    # -- conditions ---------------------------------------------------------
    def parse_or(self, scope: Scope) -> Node:
        left = self.parse_and(scope)
        if self.at_kw("or"):
            self.next()
            return make("Filter", "or", left, self.parse_or(scope))
        return left

    def parse_and(self, scope: Scope) -> Node:
        left = self.parse_atom(scope)
        if self.at_kw("and"):
            self.next()
            return make("Filter", "and", left, self.parse_and(scope))
        return left

    def parse_atom(self, scope: Scope) -> Node:
        if self.at_op("(") and not self.at_kw("select", k=1):
            self.next()
            inner = self.parse_or(scope)
            self.expect_op(")")
            return inner
        if self.at_kw("not"):
            raise UnsupportedSql("NOT before a condition")
        left = self.parse_operand(scope)
        negated = False
        if self.at_kw("not"):
            self.next()
            negated = True
        self.check_unsupported()
        tok = self.next()
        if tok.is_kw("between"):
            low = self.parse_value(scope)
            self.expect_kw("and")
            high = self.parse_value(scope)
            return make("Filter", "not_between" if negated else "between", left, low, high)
        if tok.is_kw("in", "like"):
            name = tok.lower
            return make("Filter", f"not_{name}" if negated else name, left, self.parse_value(scope))
        if tok.kind == "op" and tok.text in _CMP and not negated:
            return make("Filter", _CMP[tok.text], left, self.parse_value(scope))
        raise UnsupportedSql(f"condition operator {tok.text!r}")


def _cons(head: str, items: list) -> Node:
    node = make(head, "one", items[-1])
    for item in reversed(items[:-1]):
        node = make(head, "more", item, node)
    return node


def sql_to_ast(sql: str, graph: SchemaGraph) -> Node:
    """Parse ``sql`` and bind every identifier against ``graph``."""
    tokens = lex(sql)
    if not tokens:
        raise SqlSyntaxError("empty query")
    parser = _Parser(tokens, graph)
    tree, _ = parser.parse_statement(None)
    if parser.pos != len(tokens):
        tok = parser.peek()
        if tok is not None and tok.kind == "op" and tok.text == ")":
            raise SqlSyntaxError("unbalanced ')'")
        raise UnsupportedSql(f"trailing token {tok.text!r}")
    return tree
