"""Graph projection layer and the shared schema-linking prior."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..numerics import (
    Linear,
    Module,
    Tensor,
    dropout,
    embedding_lookup,
    gated_mix,
    matmul,
    max_rows,
    mul,
    reshape,
    scale_rows,
    sigmoid,
    softmax_rows,
    transpose,
    uniform_weight,
)
from ..schema.graph import NUM_EDGE_LABELS
from ..schema.linking import NUM_LINK_TAGS
from .attention import TransformerLayer
from .rgcn import RGCN


class LinkingPrior(Module):
    """``p_ij = Linear(Embedding(d_ij))``, one scalar per (token, node) cell."""

    def __init__(self, rng: np.random.Generator, d: int, num_tags: int = NUM_LINK_TAGS):
        bound = 1.0 / np.sqrt(d)
        self.embed = Tensor(rng.uniform(-bound, bound, size=(num_tags, d)), requires_grad=True)
        self.proj = Linear(rng, d, 1)

    def __call__(self, link: np.ndarray) -> Tensor:
        # score each tag once, then gather: equal tags get bit-identical scores
        per_tag = reshape(self.proj(self.embed), (self.embed.shape[0],))
        return embedding_lookup(per_tag, np.asarray(link))


@dataclass
class EncoderState:
    q: Tensor
    s: Tensor
    a: Tensor


class ProjectionLayer(Module):
    def __init__(
        self,
        rng: np.random.Generator,
        d: int,
        heads: int = 8,
        num_bases: int = 8,
        dropout: float = 0.0,
        scaled: bool = False,
        num_relations: int = NUM_EDGE_LABELS,
    ):
        self.d = d
        self.rate = dropout
        self.scaled = scaled
        self.w_q = uniform_weight(rng, d, d)
        self.w_k = uniform_weight(rng, d, d)
        self.v_q = uniform_weight(rng, d, d)
        self.v_s = uniform_weight(rng, d, d)
        self.v_a = uniform_weight(rng, d, d)
        # zero maps start every gate at exactly 0.5
        self.gate_q = Linear(rng, d, d, zero=True)
        self.gate_s = Linear(rng, d, d, zero=True)
        self.gate_a = Linear(rng, d, d, zero=True)
        self.rgcn_a = RGCN(rng, d, num_relations, num_bases)
        self.rgcn_s = RGCN(rng, d, num_relations, num_bases)
        self.encode_q = TransformerLayer(rng, d, heads, dropout=dropout)

    def __call__(
        self,
        state: EncoderState,
        adjacency: np.ndarray,
        prior: Optional[Tensor] = None,
        rng: Optional[np.random.Generator] = None,
        attention: Optional[np.ndarray] = None,
        return_intermediates: bool = False,
    ):
        """One layer.  ``attention`` replaces the softmaxed question-to-schema
        weights (and therefore ``u``) with a fixed matrix; it is a test seam."""
        q, s, a = state.q, state.s, state.a
        train = rng is not None
        e = matmul(matmul(q, self.w_q), transpose(matmul(s, self.w_k)))
        if self.scaled:
            e = mul(e, 1.0 / np.sqrt(self.d))
        if prior is not None:
            e = e + prior
        alpha = softmax_rows(e) if attention is None else Tensor(np.asarray(attention, dtype=np.float64))
        u, _ = max_rows(alpha)
        a_hat = scale_rows(a, u)
        b = matmul(dropout(alpha, self.rate, train, rng), matmul(a_hat, self.v_q))
        q_bar = gated_mix(sigmoid(self.gate_q(b)), b, q)

        alpha_t = softmax_rows(transpose(e))
        probs_t = dropout(alpha_t, self.rate, train, rng)
        c_s = matmul(probs_t, matmul(q, self.v_s))
        s_bar = gated_mix(sigmoid(self.gate_s(c_s)), c_s, s)
        c_a = matmul(probs_t, matmul(q, self.v_a))
        a_bar = gated_mix(sigmoid(self.gate_a(c_a)), c_a, a_hat)

        out = EncoderState(
            q=self.encode_q(q_bar, rng=rng),
            s=self.rgcn_s(s_bar, adjacency),
            a=self.rgcn_a(a_bar, adjacency),
        )
        if return_intermediates:
            return out, {
                "alpha": alpha, "u": u, "a_hat": a_hat, "b": b, "q_bar": q_bar,
                "alpha_t": alpha_t, "s_bar": s_bar, "a_bar": a_bar,
            }
        return out
