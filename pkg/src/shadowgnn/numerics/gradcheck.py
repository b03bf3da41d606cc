from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


def numerical_gradient(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-6) -> np.ndarray:
    """Central differences ``(f(x+eps e) - f(x-eps e)) / 2 eps`` for every entry of ``x``."""
    grad = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(f(x).data)
        flat[i] = orig - eps
        lo = float(f(x).data)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def analytic_gradient(f: Callable[[Tensor], Tensor], x: Tensor) -> np.ndarray:
    was = x.requires_grad
    x.requires_grad = True
    x.grad = None
    out = f(x)
    if out.data.size != 1:
        raise ValueError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    out.backward()
    grad = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
    x.grad = None
    x.requires_grad = was
    return grad


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-6) -> float:
    """Max relative error between tape gradients and central differences.

    The denominator per entry is ``max(|a|, |b|, 1e-8)``.
    """
    a = analytic_gradient(f, x)
    b = numerical_gradient(f, x, eps)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / denom))
