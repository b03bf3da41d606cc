"""Input checks shared by the estimator and the CLI."""
from __future__ import annotations

from typing import Any, Sequence

from .schema.graph import SchemaGraph, tokenize_question


def check_question(question: Any, where: str = "") -> tuple[str, ...]:
    """Token tuple from a question string or an existing token sequence."""
    if isinstance(question, str):
        tokens = tokenize_question(question)
    elif isinstance(question, (list, tuple)) and all(isinstance(t, str) for t in question):
        tokens = [t.lower() for t in question]
    else:
        raise TypeError(f"{where}question must be a string or a sequence of strings, got {type(question).__name__}")
    if not tokens:
        raise ValueError(f"{where}question has no tokens")
    return tuple(tokens)


def check_pairs(X: Any) -> list[tuple[tuple[str, ...], SchemaGraph]]:
    """Validate ``X`` as a non-empty sequence of ``(question, SchemaGraph)`` pairs."""
    if isinstance(X, (str, bytes)) or not hasattr(X, "__len__"):
        raise TypeError("X must be a sequence of (question, SchemaGraph) pairs")
    if len(X) == 0:
        raise ValueError("X is empty")
    out = []
    for i, item in enumerate(X):
        if not (isinstance(item, (tuple, list)) and len(item) == 2):
            raise TypeError(f"X[{i}] must be a (question, SchemaGraph) pair")
        question, graph = item
        if not isinstance(graph, SchemaGraph):
            raise TypeError(f"X[{i}][1] must be a SchemaGraph, got {type(graph).__name__}")
        out.append((check_question(question, f"X[{i}]: "), graph))
    return out


def check_targets(y: Any, n: int) -> list[str]:
    if isinstance(y, (str, bytes)) or not hasattr(y, "__len__"):
        raise TypeError("y must be a sequence of SQL strings")
    if len(y) != n:
        raise ValueError(f"X has {n} items but y has {len(y)}")
    for i, sql in enumerate(y):
        if not isinstance(sql, str):
            raise TypeError(f"y[{i}] must be a SQL string, got {type(sql).__name__}")
    return list(y)


def check_fraction(fraction: float) -> float:
    fraction = float(fraction)
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    return fraction


def check_positive_int(value: Any, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def check_nonempty(seq: Sequence, name: str) -> None:
    if len(seq) == 0:
        raise ValueError(f"{name} is empty")
