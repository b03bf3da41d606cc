"""SemQL grammar: production table, SQL parsing and emission, action sequences."""
from .ast import (
    Action,
    ApplyRule,
    ColumnRef,
    Cursor,
    EmitLiteral,
    GrammarError,
    GrammarViolation,
    IncompleteSequence,
    Literal,
    Node,
    SelectColumn,
    SelectTable,
    TableRef,
    action_fits,
    flatten,
    make,
    tree_to_str,
    unflatten,
)
from .canonical import canonicalize, equivalent, recover_rate, recovers, roundtrip
from .emit import ast_to_sql, join_conditions
from .lexer import SqlSyntaxError, lex
from .parser import BindError, UnsupportedSql, sql_to_ast
from .rules import NONTERMINALS, ROOT, RULES, Rule, describe, min_lengths, rule, rule_id, rules_for

__all__ = [name for name in dir() if not name.startswith("_")]
