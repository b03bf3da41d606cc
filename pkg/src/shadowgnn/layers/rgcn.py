"""Relational graph convolution with basis-decomposed relation weights."""
from __future__ import annotations

from typing import Iterable, Union

import numpy as np

from ..numerics import Module, Tensor, einsum, matmul, relu, uniform_weight
from ..schema.graph import NUM_EDGE_LABELS, SchemaGraph


def relation_adjacency(edges: Iterable[tuple[int, int, int]], num_nodes: int, num_relations: int) -> np.ndarray:
    """``A[r, i, j] = 1 / |N_i^r|`` when ``j -> i`` carries relation ``r``.

    Rows of nodes with no incoming edge under ``r`` stay zero.
    """
    adj = np.zeros((num_relations, num_nodes, num_nodes))
    for src, label, dst in edges:
        if not 0 <= label < num_relations:
            raise ValueError(f"edge {src}->{dst} has relation id {label}, expected 0..{num_relations - 1}")
        if not (0 <= src < num_nodes and 0 <= dst < num_nodes):
            raise ValueError(f"edge {src}->{dst} references a node outside 0..{num_nodes - 1}")
        adj[label, dst, src] = 1.0
    counts = adj.sum(axis=2, keepdims=True)
    return np.divide(adj, counts, out=np.zeros_like(adj), where=counts > 0)


def graph_adjacency(graph: SchemaGraph, num_relations: int = NUM_EDGE_LABELS) -> np.ndarray:
    return relation_adjacency(graph.edges, graph.num_nodes, num_relations)


class RGCN(Module):
    """``h_i' = ReLU(sum_r sum_{j in N_i^r} W_r h_j / c_{i,r} + W_0 h_i)`` with
    ``W_r = sum_b a_rb V_b``.  Vectors are rows, so ``W h`` is ``h @ W``."""

    def __init__(self, rng: np.random.Generator, d: int, num_relations: int = NUM_EDGE_LABELS, num_bases: int = 8):
        if num_bases < 1:
            raise ValueError("num_bases must be >= 1")
        self.num_relations = num_relations
        bound = 1.0 / np.sqrt(d)
        self.bases = Tensor(rng.uniform(-bound, bound, size=(num_bases, d, d)), requires_grad=True)
        cb = 1.0 / np.sqrt(num_bases)
        self.coeffs = Tensor(rng.uniform(-cb, cb, size=(num_relations, num_bases)), requires_grad=True)
        self.w_self = uniform_weight(rng, d, d)

    def relation_weights(self) -> Tensor:
        return einsum("rb,bde->rde", self.coeffs, self.bases)

    def __call__(self, h: Tensor, graph: Union[SchemaGraph, np.ndarray]) -> Tensor:
        adj = graph_adjacency(graph, self.num_relations) if isinstance(graph, SchemaGraph) else graph
        if adj.shape != (self.num_relations, h.shape[0], h.shape[0]):
            raise ValueError(f"adjacency shape {adj.shape} does not fit {h.shape[0]} nodes and {self.num_relations} relations")
        messages = einsum("jd,rde->rje", h, self.relation_weights())
        g = einsum("rij,rje->ie", Tensor(adj), messages)
        return relu(g + matmul(h, self.w_self))
