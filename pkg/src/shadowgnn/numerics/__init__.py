"""Small float64 reverse-mode autodiff engine used by every layer."""
from .checkpoint import CheckpointMismatch, load_checkpoint, save_checkpoint
from .gradcheck import analytic_gradient, grad_check, numerical_gradient
from .module import LayerNorm, Linear, Module, embedding_table, uniform_weight, zeros_param
from .optim import Adam, AdamState, NonFiniteGradient, adam_step
from .tensor import (
    ShapeError,
    Tape,
    Tensor,
    add,
    concat,
    concat_last_dim,
    concat_rows,
    cross_entropy,
    dropout,
    einsum,
    embedding_lookup,
    gated_mix,
    gru_sequence,
    gru_step,
    layer_norm,
    log_softmax,
    matmul,
    max_rows,
    mean_rows,
    mul,
    nll_rows,
    one_minus,
    relu,
    reshape,
    row,
    scale_rows,
    sigmoid,
    softmax_rows,
    stack_rows,
    sub,
    take_rows,
    tanh,
    total,
    transpose,
    zeros,
)

__all__ = [name for name in dir() if not name.startswith("_")]
