"""Multi-head self-attention layers: plain transformer and relation-aware."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..numerics import (
    LayerNorm,
    Linear,
    Module,
    Tensor,
    dropout,
    einsum,
    embedding_lookup,
    matmul,
    mul,
    relu,
    reshape,
    softmax_rows,
    uniform_weight,
)
from ..schema.relations import NUM_RELATIONS


class TransformerLayer(Module):
    """Post-norm self-attention block; heads are concatenated without an output map."""

    def __init__(
        self,
        rng: np.random.Generator,
        d: int,
        heads: int = 8,
        ff_mult: int = 4,
        dropout: float = 0.0,
        num_relations: int = 0,
    ):
        if d % heads:
            raise ValueError(f"width {d} is not divisible by {heads} heads")
        self.d, self.heads, self.head_dim = d, heads, d // heads
        self.rate = dropout
        self.w_q = uniform_weight(rng, d, d)
        self.w_k = uniform_weight(rng, d, d)
        self.w_v = uniform_weight(rng, d, d)
        self.norm1 = LayerNorm(d)
        self.ff1 = Linear(rng, d, ff_mult * d)
        self.ff2 = Linear(rng, ff_mult * d, d)
        self.norm2 = LayerNorm(d)
        self.num_relations = num_relations
        if num_relations:
            bound = 1.0 / np.sqrt(self.head_dim)
            # one table per direction, shared by all heads
            self.rel_k = Tensor(rng.uniform(-bound, bound, size=(num_relations, self.head_dim)), requires_grad=True)
            self.rel_v = Tensor(rng.uniform(-bound, bound, size=(num_relations, self.head_dim)), requires_grad=True)

    def _split(self, x: Tensor) -> Tensor:
        return reshape(x, (x.shape[0], self.heads, self.head_dim))

    def __call__(
        self,
        x: Tensor,
        relations: Optional[np.ndarray] = None,
        rng: Optional[np.random.Generator] = None,
        return_attention: bool = False,
    ):
        n = x.shape[0]
        train = rng is not None
        q = self._split(matmul(x, self.w_q))
        k = self._split(matmul(x, self.w_k))
        v = self._split(matmul(x, self.w_v))
        scores = einsum("ihd,jhd->hij", q, k)
        if relations is not None:
            if not self.num_relations:
                raise ValueError("this layer has no relation tables")
            relations = np.asarray(relations)
            if relations.shape != (n, n):
                raise ValueError(f"relation matrix {relations.shape} does not match sequence length {n}")
            if relations.min() < 0 or relations.max() >= self.num_relations:
                raise ValueError(f"relation ids must lie in 0..{self.num_relations - 1}")
            rk = embedding_lookup(self.rel_k, relations)
            scores = scores + einsum("ihd,ijd->hij", q, rk)
        alpha = softmax_rows(mul(scores, 1.0 / np.sqrt(self.head_dim)))
        probs = dropout(alpha, self.rate, train, rng)
        z = einsum("hij,jhd->ihd", probs, v)
        if relations is not None:
            rv = embedding_lookup(self.rel_v, relations)
            z = z + einsum("hij,ijd->ihd", probs, rv)
        y = self.norm1(x + reshape(z, (n, self.d)))
        ff = dropout(self.ff2(relu(self.ff1(y))), self.rate, train, rng)
        out = self.norm2(y + ff)
        if return_attention:
            return out, alpha
        return out


class RATLayer(TransformerLayer):
    """Self-attention with relation key/value biases looked up per cell."""

    def __init__(self, rng: np.random.Generator, d: int, heads: int = 8, ff_mult: int = 4, dropout: float = 0.0,
                 num_relations: int = NUM_RELATIONS):
        super().__init__(rng, d, heads, ff_mult, dropout, num_relations)

    def __call__(self, x: Tensor, relations: np.ndarray, rng=None, return_attention: bool = False):
        if relations is None:
            raise ValueError("RATLayer needs a relation matrix")
        return super().__call__(x, relations, rng, return_attention)
