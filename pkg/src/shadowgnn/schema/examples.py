from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .graph import SchemaError, SchemaGraph, tokenize_question


@dataclass(frozen=True)
class TrainExample:
    question: str
    question_tokens: tuple[str, ...]
    db_id: str
    query: str
    actions: Optional[tuple] = field(default=None, compare=False)

    def with_actions(self, actions) -> "TrainExample":
        return replace(self, actions=tuple(actions))


def _schema_map(schemas: Union[Mapping[str, SchemaGraph], Iterable[SchemaGraph]]) -> dict[str, SchemaGraph]:
    if isinstance(schemas, Mapping):
        return dict(schemas)
    return {g.db_id: g for g in schemas}


def make_example(entry: dict, known: Mapping[str, SchemaGraph], where: str = "") -> TrainExample:
    for key in ("db_id", "question", "query"):
        if key not in entry:
            raise SchemaError(f"{where}missing field {key!r}")
    if entry["db_id"] not in known:
        raise SchemaError(f"{where}unknown db_id {entry['db_id']!r}; known ids: {sorted(known)}")
    return TrainExample(
        question=entry["question"],
        question_tokens=tuple(tokenize_question(entry["question"])),
        db_id=entry["db_id"],
        query=entry["query"],
    )


def load_examples(path, schemas) -> list[TrainExample]:
    """Read a Spider-layout examples file (``db_id``, ``question``, ``query``)."""
    path = Path(path)
    known = _schema_map(schemas)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, list):
        raise SchemaError(f"{path}: expected a JSON array of examples")
    return [make_example(entry, known, f"{path}: example {i}: ") for i, entry in enumerate(doc)]
