"""Parameter containers shared by every layer."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Tensor, layer_norm, matmul


def uniform_weight(rng: np.random.Generator, fan_in: int, fan_out: int, name: str | None = None) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True, name=name)


def embedding_table(rng: np.random.Generator, rows: int, d: int) -> Tensor:
    """Standard-normal rows, the usual initialisation for lookup tables."""
    return Tensor(rng.standard_normal((rows, d)), requires_grad=True)


def zeros_param(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class Module:
    """Minimal parameter tree.

    Parameters are attributes holding a :class:`Tensor` with
    ``requires_grad=True``; children are attributes holding a ``Module`` or a
    list of them.  Paths are dotted attribute names, e.g. ``rat.0.w_q``.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            path = f"{prefix}{key}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, p in own.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {value.shape} vs {p.shape}")
            p.data = value.copy()


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, bias: bool = True, zero: bool = False):
        if zero:
            self.weight = zeros_param(d_in, d_out)
        else:
            self.weight = uniform_weight(rng, d_in, d_out)
        self.bias = zeros_param(d_out) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim == 1:
            y = matmul(x.reshape(1, -1), self.weight).reshape(-1)
        else:
            y = matmul(x, self.weight)
        if self.bias is not None:
            y = y + self.bias
        return y


class LayerNorm(Module):
    def __init__(self, d: int):
        self.gain = Tensor(np.ones(d), requires_grad=True)
        self.bias = zeros_param(d)

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias)
