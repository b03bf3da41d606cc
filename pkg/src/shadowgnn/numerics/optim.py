from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.  Returns new arrays; inputs are left untouched.

    Parameters without a gradient entry are skipped (their moments are not advanced).
    """
    if state.step < 0:
        raise ValueError("Adam step counter must be >= 0")
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"non-finite gradient for parameter {name!r}")
    b1, b2 = betas
    t = state.step + 1
    m, v = dict(state.m), dict(state.v)
    out = dict(params)
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name!r} {p.shape}")
        mi = b1 * m.get(name, 0.0) + (1.0 - b1) * g
        vi = b2 * v.get(name, 0.0) + (1.0 - b2) * g * g
        m[name], v[name] = mi, vi
        out[name] = p - lr * (mi / c1) / (np.sqrt(vi / c2) + eps)
    return out, AdamState(step=t, m=m, v=v)


class Adam:
    """Adam over a named parameter mapping, updating the tensors in place."""

    def __init__(self, named_params, lr: float = 2e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params: dict[str, Tensor] = dict(named_params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.state = AdamState()

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        grads = {n: p.grad for n, p in self.params.items() if p.grad is not None}
        values = {n: p.data for n, p in self.params.items()}
        new, self.state = adam_step(values, grads, self.state, self.lr, self.betas, self.eps)
        for name in grads:
            self.params[name].data = new[name]
