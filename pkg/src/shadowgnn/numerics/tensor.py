"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tensor` wraps a numpy array and remembers the primitive that
produced it.  Calling :meth:`Tensor.backward` on a scalar builds a
:class:`Tape` (the reverse topological order of the recorded graph) and
runs every backward rule exactly once, accumulating gradients.

Only the shapes the encoder/decoder layers need are supported: elementwise
ops broadcast numpy-style, ``matmul`` handles 2-D and equal-rank 3-D
operands, and reductions are over explicit axes.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        Tape.from_output(self).backward(grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self) -> "Tensor":
        return total(self)


class Tape:
    """Reverse topological ordering of the nodes reachable from an output.

    Built on demand from the parent links recorded during the forward pass;
    each forward computation therefore owns its own tape.
    """

    def __init__(self, nodes: list):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> "Tape":
        order: list = []
        seen: set = set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        order.reverse()
        return cls(order)

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        if not self.nodes:
            return
        output = self.nodes[0]
        if grad is None:
            if output.data.size != 1:
                raise ShapeError(f"backward() needs an explicit gradient for shape {output.shape}")
            grad = np.ones_like(output.data)
        grads = {id(output): np.asarray(grad, dtype=DTYPE)}
        for node in self.nodes:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                # leaf: accumulate across backward calls
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape

    def backward(g):
        return unbroadcast(g, sa), unbroadcast(g, sb)

    return _node(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape

    def backward(g):
        return unbroadcast(g, sa), unbroadcast(-g, sb)

    return _node(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a = _as_tensor(a)
    if not isinstance(b, Tensor):
        c = float(b)

        def backward_scalar(g):
            return (g * c,)

        return _node(a.data * c, (a,), backward_scalar)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data

    def backward(g):
        return unbroadcast(g * bd, ad.shape), unbroadcast(g * ad, bd.shape)

    return _node(ad * bd, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return _node(np.where(mask, x.data, 0.0), (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    # split by sign so exp never overflows
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def backward(g):
        return (g * out * (1.0 - out),)

    return _node(out, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _node(out, (x,), backward)


def one_minus(x: Tensor) -> Tensor:
    def backward(g):
        return (-g,)

    return _node(1.0 - x.data, (x,), backward)


def dropout(x: Tensor, rate: float, train: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout; the identity (same object) when not training."""
    if not train or rate <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs a random generator")
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep) / keep

    def backward(g):
        return (g * mask,)

    return _node(x.data * mask, (x,), backward)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim not in (2, 3) or a.ndim != b.ndim:
        raise ShapeError(f"matmul: unsupported ranks for shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2] or (a.ndim == 3 and a.shape[0] != b.shape[0]):
        raise ShapeError(f"matmul: dimension mismatch between {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        return g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g

    return _node(ad @ bd, (a, b), backward)


def _contract(x_idx: str, y_idx: str, out_idx: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Two-operand einsum as one batched matmul (indices summed in one operand are not allowed)."""
    batch = [c for c in out_idx if c in x_idx and c in y_idx]
    summed = [c for c in x_idx if c in y_idx and c not in out_idx]
    x_only = [c for c in out_idx if c in x_idx and c not in y_idx]
    y_only = [c for c in out_idx if c in y_idx and c not in x_idx]
    xs = dict(zip(x_idx, x.shape))
    ys = dict(zip(y_idx, y.shape))
    size = lambda dims, idx: math.prod(dims[c] for c in idx)  # noqa: E731
    xm = x.transpose([x_idx.index(c) for c in batch + x_only + summed]).reshape(
        size(xs, batch), size(xs, x_only), size(xs, summed)
    )
    ym = y.transpose([y_idx.index(c) for c in batch + summed + y_only]).reshape(
        size(ys, batch), size(ys, summed), size(ys, y_only)
    )
    res = np.matmul(xm, ym).reshape([xs[c] for c in batch + x_only] + [ys[c] for c in y_only])
    order = batch + x_only + y_only
    return np.ascontiguousarray(res.transpose([order.index(c) for c in out_idx]))


def einsum(spec: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand einsum with explicit output, e.g. ``"ihd,jhd->hij"``.

    Every index of an operand must also occur in the other operand or in the
    output, so each gradient is itself a two-operand contraction.
    """
    lhs, out_idx = spec.replace(" ", "").split("->")
    a_idx, b_idx = lhs.split(",")
    for own, other in ((a_idx, b_idx), (b_idx, a_idx)):
        for ch in own:
            if ch not in other and ch not in out_idx:
                raise ValueError(f"einsum: index {ch!r} is summed within a single operand in {spec!r}")
    a, b = _as_tensor(a), _as_tensor(b)
    if len(a_idx) != a.ndim or len(b_idx) != b.ndim:
        raise ShapeError(f"einsum {spec!r}: ranks do not match shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    sizes: dict[str, int] = {}
    for idx, arr in ((a_idx, ad), (b_idx, bd)):
        for ch, n in zip(idx, arr.shape):
            if sizes.setdefault(ch, n) != n:
                raise ShapeError(f"einsum {spec!r}: index {ch!r} has sizes {sizes[ch]} and {n}")
    out = _contract(a_idx, b_idx, out_idx, ad, bd)

    def backward(g):
        return _contract(out_idx, b_idx, a_idx, g, bd), _contract(out_idx, a_idx, b_idx, g, ad)

    return _node(out, (a, b), backward)


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        if x.ndim < 2:
            raise ShapeError(f"transpose needs rank >= 2, got {x.shape}")
        axes = list(range(x.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return _node(np.transpose(x.data, axes), (x,), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    orig = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {orig} into {tuple(shape)}") from None

    def backward(g):
        return (g.reshape(orig),)

    return _node(out, (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of an empty list")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        shapes = [t.shape for t in tensors]
        raise ShapeError(f"concat: incompatible shapes {shapes}: {exc}") from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _node(out, tuple(tensors), backward)


def concat_last_dim(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=-1)


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    return concat(tensors, axis=0)


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors into a 2-D matrix."""
    return concat([reshape(t, (1, -1)) for t in tensors], axis=0)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of ``table``; gradients scatter-add into the used rows only."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding ids out of range for table of {table.shape[0]} rows")
    rows = table.shape[0]

    def backward(g):
        full = np.zeros((rows,) + g.shape[ids.ndim:], dtype=DTYPE)
        np.add.at(full, ids, g)
        return (full,)

    return _node(table.data[ids], (table,), backward)


take_rows = embedding_lookup


def row(x: Tensor, i: int) -> Tensor:
    """Row ``i`` of a 2-D tensor as a 1-D tensor."""
    shape = x.shape

    def backward(g):
        full = np.zeros(shape, dtype=DTYPE)
        full[i] = g
        return (full,)

    return _node(x.data[i], (x,), backward)


# ---------------------------------------------------------------------------
# reductions and normalisation


def total(x: Tensor) -> Tensor:
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _node(np.asarray(x.data.sum()), (x,), backward)


def mean_rows(x: Tensor) -> Tensor:
    """Mean over axis 0: ``(n, d) -> (d,)``."""
    n = x.shape[0]
    if n == 0:
        raise ShapeError("mean_rows of an empty tensor")
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(g / n, shape).copy(),)

    return _node(x.data.mean(axis=0), (x,), backward)


def max_rows(x: Tensor) -> tuple[Tensor, np.ndarray]:
    """Max over axis 0 with argmax; ties go to the lowest row index."""
    if x.shape[0] == 0:
        raise ShapeError("max_rows of an empty tensor")
    idx = np.argmax(x.data, axis=0)
    cols = np.arange(x.shape[1]) if x.ndim == 2 else None
    shape = x.shape
    if x.ndim == 1:
        values = x.data[idx]
    else:
        values = x.data[idx, cols]

    def backward(g):
        full = np.zeros(shape, dtype=DTYPE)
        if cols is None:
            full[idx] = g
        else:
            full[idx, cols] = g
        return (full,)

    return _node(np.asarray(values), (x,), backward), idx


def softmax_rows(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax over the last axis; ``mask`` marks the allowed entries."""
    d = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != d.shape:
            raise ShapeError(f"softmax mask shape {mask.shape} does not match {d.shape}")
        if not mask.any(axis=-1).all():
            raise ValueError("softmax_rows: a row is fully masked")
        d = np.where(mask, d, -np.inf)
    shifted = d - d.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _node(out, (x,), backward)


def log_softmax(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Log-softmax over the last axis; masked entries come out as -inf."""
    d = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != d.shape:
            raise ShapeError(f"log_softmax mask shape {mask.shape} does not match {d.shape}")
        if not mask.any(axis=-1).all():
            raise ValueError("log_softmax: a row is fully masked")
        d = np.where(mask, d, -np.inf)
    shifted = d - d.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def backward(g):
        g = np.where(np.isfinite(out), g, 0.0)
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _node(out, (x,), backward)


def cross_entropy(logits: Tensor, target: int, mask: Optional[np.ndarray] = None) -> Tensor:
    """Negative log-probability of ``target`` under a masked softmax of a 1-D logit vector."""
    if logits.ndim != 1:
        raise ShapeError(f"cross_entropy expects a 1-D logit vector, got {logits.shape}")
    d = logits.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask[target]:
            raise ValueError(f"cross_entropy: target {target} is masked out")
        d = np.where(mask, d, -np.inf)
    shifted = d - d.max()
    e = np.exp(shifted)
    z = e.sum()
    probs = e / z
    loss = np.log(z) - shifted[target]

    def backward(g):
        grad = probs.copy()
        grad[target] -= 1.0
        return (g * grad,)

    return _node(np.asarray(loss), (logits,), backward)


def nll_rows(logits: Tensor, targets, mask: Optional[np.ndarray] = None) -> Tensor:
    """Summed negative log-likelihood of ``targets[t]`` under a masked softmax of row ``t``."""
    if logits.ndim != 2:
        raise ShapeError(f"nll_rows expects (T, K) logits, got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64)
    rows = np.arange(logits.shape[0])
    if targets.shape != rows.shape:
        raise ShapeError(f"nll_rows: {targets.shape[0]} targets for {rows.size} rows")
    d = logits.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != d.shape:
            raise ShapeError(f"nll_rows mask shape {mask.shape} does not match {d.shape}")
        if not mask[rows, targets].all():
            raise ValueError("nll_rows: a target is masked out")
        d = np.where(mask, d, -np.inf)
    shifted = d - d.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    z = e.sum(axis=1)
    probs = e / z[:, None]
    loss = float(np.sum(np.log(z) - shifted[rows, targets]))

    def backward(g):
        grad = probs.copy()
        grad[rows, targets] -= 1.0
        return (g * grad,)

    return _node(np.asarray(loss), (logits,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} do not match last dim {d}")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gd = gain.data

    def backward(g):
        gx = g * gd
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        red = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return _node(xhat * gd + bias.data, (x, gain, bias), backward)


def scale_rows(x: Tensor, s: Tensor) -> Tensor:
    """Multiply row ``j`` of ``x`` by scalar ``s[j]``: ``(m, d) * (m,)``."""
    if s.ndim != 1 or x.shape[0] != s.shape[0]:
        raise ShapeError(f"scale_rows: {x.shape} vs {s.shape}")
    xd, sd = x.data, s.data

    def backward(g):
        return g * sd[:, None], (g * xd).sum(axis=1)

    return _node(xd * sd[:, None], (x, s), backward)


def gated_mix(gate: Tensor, new: Tensor, old: Tensor) -> Tensor:
    """``gate * new + (1 - gate) * old`` as one node."""
    gd, nd, od = gate.data, new.data, old.data

    def backward(g):
        return g * (nd - od), g * gd, g * (1.0 - gd)

    return _node(gd * nd + (1.0 - gd) * od, (gate, new, old), backward)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=DTYPE), requires_grad=requires_grad)


def tensors_finite(tensors: Iterable[Tensor]) -> bool:
    return all(np.isfinite(t.data).all() for t in tensors)


# ---------------------------------------------------------------------------
# recurrence


def _sig(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def gru_step(gx: np.ndarray, h: np.ndarray, w_h: np.ndarray, b_h: np.ndarray) -> np.ndarray:
    """One GRU update on plain arrays; gate blocks are ordered ``[z, r, n]``."""
    d = h.shape[-1]
    gh = h @ w_h + b_h
    z = _sig(gx[..., :d] + gh[..., :d])
    r = _sig(gx[..., d : 2 * d] + gh[..., d : 2 * d])
    n = np.tanh(gx[..., 2 * d :] + r * gh[..., 2 * d :])
    return (1.0 - z) * n + z * h


def gru_sequence(gx: Tensor, h0: Tensor, w_h: Tensor, b_h: Tensor) -> Tensor:
    """Run a GRU over precomputed input projections ``gx`` (T, 3d).

    Returns all hidden states (T, d).  The whole recurrence is one tape node
    whose backward is back-propagation through time.
    """
    T, d = gx.shape[0], h0.shape[0]
    if gx.shape != (T, 3 * d) or w_h.shape != (d, 3 * d) or b_h.shape != (3 * d,):
        raise ShapeError(f"gru_sequence: gx {gx.shape}, h0 {h0.shape}, w_h {w_h.shape}, b_h {b_h.shape}")
    GX, W, b = gx.data, w_h.data, b_h.data
    hs = np.empty((T + 1, d), dtype=DTYPE)
    hs[0] = h0.data
    zs, rs, ns, ghn = (np.empty((T, d), dtype=DTYPE) for _ in range(4))
    for t in range(T):
        gh = hs[t] @ W + b
        z = _sig(GX[t, :d] + gh[:d])
        r = _sig(GX[t, d : 2 * d] + gh[d : 2 * d])
        n = np.tanh(GX[t, 2 * d :] + r * gh[2 * d :])
        hs[t + 1] = (1.0 - z) * n + z * hs[t]
        zs[t], rs[t], ns[t], ghn[t] = z, r, n, gh[2 * d :]

    def backward(g):
        dgx = np.empty((T, 3 * d), dtype=DTYPE)
        dgh_all = np.empty((T, 3 * d), dtype=DTYPE)
        carry = np.zeros(d, dtype=DTYPE)
        for t in range(T - 1, -1, -1):
            dh = g[t] + carry
            z, r, n = zs[t], rs[t], ns[t]
            dn = dh * (1.0 - z) * (1.0 - n * n)
            dz = dh * (hs[t] - n) * z * (1.0 - z)
            dr = dn * ghn[t] * r * (1.0 - r)
            dgx[t, :d], dgx[t, d : 2 * d], dgx[t, 2 * d :] = dz, dr, dn
            dgh_all[t, :d], dgh_all[t, d : 2 * d], dgh_all[t, 2 * d :] = dz, dr, dn * r
            carry = dh * z + dgh_all[t] @ W.T
        return dgx, carry, hs[:-1].T @ dgh_all, dgh_all.sum(axis=0)

    return _node(hs[1:].copy(), (gx, h0, w_h, b_h), backward)
