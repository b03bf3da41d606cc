from __future__ import annotations

import re
from dataclasses import dataclass


class SqlSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # "id", "num", "str", "op"
    text: str

    @property
    def lower(self) -> str:
        return self.text.lower()

    def is_kw(self, *words: str) -> bool:
        return self.kind == "id" and self.text.lower() in words


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<str>'(?:[^']|'')*'|"[^"]*")
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*|`[^`]+`)
  | (?P<op>!=|<>|<=|>=|[=<>+\-*/(),.;])
    """,
    re.VERBOSE,
)


def lex(sql: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(sql):
        m = _TOKEN_RE.match(sql, pos)
        if m is None:
            raise SqlSyntaxError(f"unexpected character {sql[pos]!r} at offset {pos}")
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        text = m.group(kind)
        if kind == "id" and text.startswith("`"):
            text = text[1:-1]
        tokens.append(Token(kind, text))
    while tokens and tokens[-1].text == ";":
        tokens.pop()
    return tokens
