"""Question/schema encoder: embeddings, projection stack, relation-aware stack."""
from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .layers import EncoderState, LinkingPrior, ProjectionLayer, RATLayer, graph_adjacency
from .numerics import Module, Tensor, concat_rows, embedding_lookup, embedding_table, matmul, take_rows
from .schema.graph import SchemaGraph
from .schema.linking import ValueIndex, tag_linking
from .schema.relations import build_relation_matrix


@dataclass
class EncoderConfig:
    d: int = 512
    heads: int = 8
    bases: int = 8
    gpnn_layers: int = 4
    rat_layers: int = 4
    dropout: float = 0.3
    scaled: bool = False
    hash_buckets: int = 512
    max_positions: int = 128

    def __post_init__(self):
        if self.gpnn_layers < 0 or self.rat_layers < 0:
            raise ValueError("gpnn_layers and rat_layers must be >= 0")
        if self.d < 1 or self.heads < 1 or self.d % self.heads:
            raise ValueError(f"d={self.d} must be a positive multiple of heads={self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return asdict(self)


class Vocabulary:
    """Word vocabulary with hashed character-trigram pieces for unknown words.

    A known word is one piece; an unknown word is the mean of its trigram
    buckets, so every word (and every pooled node name) is a fixed average of
    embedding rows.
    """

    def __init__(self, words: Iterable[str] = (), hash_buckets: int = 512):
        self.words = sorted(set(words))
        self.hash_buckets = hash_buckets
        self._index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]], graphs: Iterable[SchemaGraph], hash_buckets: int = 512):
        words: set[str] = set()
        for toks in token_lists:
            words.update(toks)
        for g in graphs:
            for node in range(g.num_nodes):
                words.update(g.node_tokens(node))
        return cls(words, hash_buckets)

    def __len__(self) -> int:
        return len(self.words) + self.hash_buckets

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def pieces(self, word: str) -> list[int]:
        if word in self._index:
            return [self._index[word]]
        if self.hash_buckets == 0:
            raise KeyError(f"unknown word {word!r} and no hash buckets")
        padded = f"<{word}>"
        grams = [padded[i : i + 3] for i in range(max(1, len(padded) - 2))]
        base = len(self.words)
        return [base + zlib.crc32(g.encode("utf-8")) % self.hash_buckets for g in grams]

    def to_dict(self) -> dict:
        return {"words": self.words, "hash_buckets": self.hash_buckets}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(data["words"], data["hash_buckets"])


def _pool(vocab: Vocabulary, groups: Sequence[Sequence[str]]) -> tuple[np.ndarray, np.ndarray]:
    """Unique piece ids and a row-stochastic matrix averaging words, then pieces."""
    weights: list[dict[int, float]] = []
    for words in groups:
        row: dict[int, float] = {}
        words = list(words) or ["<empty>"]
        for w in words:
            pieces = vocab.pieces(w)
            for p in pieces:
                row[p] = row.get(p, 0.0) + 1.0 / (len(words) * len(pieces))
        weights.append(row)
    ids = np.array(sorted({p for row in weights for p in row}), dtype=np.int64)
    col = {p: k for k, p in enumerate(ids)}
    mat = np.zeros((len(groups), len(ids)))
    for i, row in enumerate(weights):
        for p, w in row.items():
            mat[i, col[p]] = w
    return ids, mat


@dataclass
class EncoderInput:
    """Everything the encoder needs about one (question, schema) pair."""

    tokens: tuple[str, ...]
    graph: SchemaGraph
    q_ids: np.ndarray
    q_pool: np.ndarray
    s_ids: np.ndarray
    s_pool: np.ndarray
    types: np.ndarray
    link: np.ndarray
    adjacency: np.ndarray
    relations: np.ndarray

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def m(self) -> int:
        return self.graph.num_nodes


def prepare_input(
    tokens: Sequence[str],
    graph: SchemaGraph,
    vocab: Vocabulary,
    value_index: Optional[ValueIndex] = None,
    link: Optional[np.ndarray] = None,
) -> EncoderInput:
    tokens = tuple(tokens)
    if not tokens:
        raise ValueError("question has no tokens")
    if link is None:
        link = tag_linking(tokens, graph, value_index)
    q_ids, q_pool = _pool(vocab, [[t] for t in tokens])
    s_ids, s_pool = _pool(vocab, [graph.node_tokens(j) for j in range(graph.num_nodes)])
    return EncoderInput(
        tokens=tokens,
        graph=graph,
        q_ids=q_ids,
        q_pool=q_pool,
        s_ids=s_ids,
        s_pool=s_pool,
        types=np.asarray(graph.node_types(), dtype=np.int64),
        link=np.asarray(link),
        adjacency=graph_adjacency(graph),
        relations=build_relation_matrix(tokens, graph, link),
    )


@dataclass
class EncoderOutput:
    """Unified memory ``f``: question rows first, then schema rows."""

    f: Tensor
    n: int
    m: int
    q_abstract: Optional[Tensor] = None
    extras: dict = field(default_factory=dict)

    @property
    def f_q(self) -> Tensor:
        return take_rows(self.f, np.arange(self.n))

    @property
    def f_schema(self) -> Tensor:
        return take_rows(self.f, np.arange(self.n, self.n + self.m))


class Encoder(Module):
    def __init__(self, rng: np.random.Generator, vocab_size: int, config: EncoderConfig):
        c = config
        self.config = c
        self.words = embedding_table(rng, vocab_size, c.d)
        self.positions = embedding_table(rng, c.max_positions, c.d)
        self.types = embedding_table(rng, 2, c.d)
        self.prior = LinkingPrior(rng, c.d) if c.gpnn_layers else None
        self.gpnn = [
            ProjectionLayer(rng, c.d, c.heads, c.bases, c.dropout, c.scaled) for _ in range(c.gpnn_layers)
        ]
        self.rat = [RATLayer(rng, c.d, c.heads, dropout=c.dropout) for _ in range(c.rat_layers)]

    def embed(self, inp: EncoderInput) -> EncoderState:
        """Initial streams ``q0`` (words + positions), ``s0`` (pooled names), ``a0`` (types)."""
        pos = np.minimum(np.arange(inp.n), self.config.max_positions - 1)
        q = matmul(Tensor(inp.q_pool), embedding_lookup(self.words, inp.q_ids))
        q = q + embedding_lookup(self.positions, pos)
        s = matmul(Tensor(inp.s_pool), embedding_lookup(self.words, inp.s_ids))
        a = embedding_lookup(self.types, inp.types)
        return EncoderState(q, s, a)

    def __call__(
        self,
        inp: EncoderInput,
        rng: Optional[np.random.Generator] = None,
        state: Optional[EncoderState] = None,
    ) -> EncoderOutput:
        """Encode one pair; dropout is active only when ``rng`` is given.

        ``state`` overrides the embedded streams (a test seam).
        """
        if state is None:
            state = self.embed(inp)
        if self.gpnn:
            prior = self.prior(inp.link)
            for layer in self.gpnn:
                state = layer(state, inp.adjacency, prior, rng=rng)
            schema = state.a
        else:
            # without projection layers the schema enters by name, as in RAT-SQL
            schema = state.s
        f = concat_rows([state.q, schema])
        for layer in self.rat:
            f = layer(f, inp.relations, rng=rng)
        return EncoderOutput(f=f, n=inp.n, m=inp.m, q_abstract=state.q)
