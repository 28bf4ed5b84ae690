"""Differentiable operations over ``Tensor``.

Every op checks its operands, computes the forward value with numpy, rejects
non-finite results and, when a tape is active and an operand requires grad,
records a closure that maps the upstream gradient to operand gradients.
"""
from typing import List, Optional, Sequence

import numpy as np

from utils.errors import ContractError, DegenerateRowError, DimensionError, NonFiniteError
from .tensor import BackwardFn, Tensor, active_tape

# Additive stand-in for -inf on forbidden attention logits
MASK_FILL = -1e30


def emit(data: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn, op: str) -> Tensor:
    """Wrap a forward result and record it on the active tape when needed."""
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = False
    out.tape_node = None
    out.name = None
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(out, inputs, backward, op)
    return out


def _broadcast_kind(a: Tensor, b: Tensor, op: str) -> bool:
    """True when ``b`` is a row vector broadcast over the rows of ``a``."""
    if a.shape == b.shape:
        return False
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return True
    raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# Linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of ``[m x k]`` and ``[k x n]``."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(g):
        return g @ b_data.T, a_data.T @ g

    return emit(a_data @ b_data, (a, b), backward, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise DimensionError(f"transpose: expected a matrix, got shape {a.shape}")
    return emit(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


# Elementwise

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a row vector broadcast over ``a``."""
    rowwise = _broadcast_kind(a, b, "add")

    def backward(g):
        return g, (g.sum(axis=0) if rowwise else g)

    return emit(a.data + b.data, (a, b), backward, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; ``b`` may be a row vector broadcast over ``a``."""
    rowwise = _broadcast_kind(a, b, "mul")
    a_data, b_data = a.data, b.data

    def backward(g):
        gb = g * a_data
        return g * b_data, (gb.sum(axis=0) if rowwise else gb)

    return emit(a_data * b_data, (a, b), backward, "mul")


def scale(a: Tensor, factor: float) -> Tensor:
    return emit(a.data * factor, (a,), lambda g: (g * factor,), "scale")


def relu(a: Tensor) -> Tensor:
    positive = a.data > 0

    return emit(np.where(positive, a.data, 0.0), (a,), lambda g: (g * positive,), "relu")


def dropout(a: Tensor, p: float, rng: Optional[np.random.Generator], train: bool) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-p); identity outside training."""
    if not train or p == 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout probability must be in [0, 1), got {p}")
    if rng is None:
        raise ContractError("dropout in training mode needs a random generator")
    keep = (rng.random(a.shape) >= p) / (1.0 - p)

    return emit(a.data * keep, (a,), lambda g: (g * keep,), "dropout")


# Reductions and layout

def sum_all(a: Tensor) -> Tensor:
    """Sum of every element, as a scalar tensor."""
    shape = a.shape

    return emit(np.array(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),), "sum")


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack matrices vertically."""
    return _concat(parts, axis=0, op="concat_rows")


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    """Stack matrices side by side."""
    return _concat(parts, axis=1, op="concat_cols")


def _concat(parts: Sequence[Tensor], axis: int, op: str) -> Tensor:
    if not parts:
        raise DimensionError(f"{op}: nothing to concatenate")
    other = 1 - axis
    if any(p.data.ndim != 2 or p.shape[other] != parts[0].shape[other] for p in parts):
        raise DimensionError(f"{op}: mismatched shapes {[p.shape for p in parts]}")
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(g):
        return np.split(g, bounds, axis=axis)

    return emit(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), backward, op)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    """Rows ``start:stop`` of a matrix."""
    if a.data.ndim != 2 or not 0 <= start <= stop <= a.shape[0]:
        raise DimensionError(f"slice_rows: [{start}:{stop}] out of range for {a.shape}")
    shape = a.shape

    def backward(g):
        full = np.zeros(shape)
        full[start:stop] = g
        return (full,)

    return emit(a.data[start:stop].copy(), (a,), backward, "slice_rows")


# Normalizations

def masked_softmax_rows(x: Tensor,
                        allowed: Optional[np.ndarray] = None,
                        query_valid: Optional[np.ndarray] = None) -> Tensor:
    """Row softmax restricted to allowed positions.

    Forbidden entries are exactly zero. A row with no allowed position is an
    error unless ``query_valid`` marks it as padding, in which case the whole
    row is zero.

    Args:
        x: Logits ``[m x n]``.
        allowed: Boolean ``[m x n]`` mask, None allows everything.
        query_valid: Boolean ``[m]``, False for padded rows.

    Raises:
        DegenerateRowError: A real row has no allowed position.
    """
    if x.data.ndim != 2:
        raise DimensionError(f"masked_softmax_rows: expected a matrix, got {x.shape}")
    if allowed is None:
        shifted = x.data - x.data.max(axis=1, keepdims=True)
        weights = np.exp(shifted)
        weights /= weights.sum(axis=1, keepdims=True)
    else:
        if allowed.shape != x.shape:
            raise DimensionError(f"masked_softmax_rows: mask {allowed.shape} does not match {x.shape}")
        empty = ~allowed.any(axis=1)
        if empty.any():
            real = empty if query_valid is None else empty & query_valid
            if real.any():
                row = int(np.flatnonzero(real)[0])
                raise DegenerateRowError(f"softmax row {row} has no allowed position")
        logits = np.where(allowed, x.data, MASK_FILL)
        shifted = logits - logits.max(axis=1, keepdims=True)
        weights = np.where(allowed, np.exp(shifted), 0.0)
        totals = weights.sum(axis=1, keepdims=True)
        weights = np.divide(weights, totals, out=np.zeros_like(weights), where=totals > 0)

    def backward(g):
        return (weights * (g - (weights * g).sum(axis=1, keepdims=True)),)

    return emit(weights, (x,), backward, "masked_softmax_rows")


def log_softmax_rows(x: Tensor) -> Tensor:
    """Row-wise log-softmax."""
    if x.data.ndim != 2:
        raise DimensionError(f"log_softmax_rows: expected a matrix, got {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=1, keepdims=True),)

    return emit(out, (x,), backward, "log_softmax_rows")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row ``gain * (x - mean) / sqrt(var + eps) + bias``."""
    if x.data.ndim != 2 or x.shape[1] < 2:
        raise DimensionError(f"layer_norm: needs rows of width >= 2, got {x.shape}")
    if gain.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
        raise DimensionError(f"layer_norm: gain/bias {gain.shape}/{bias.shape} do not match {x.shape}")
    centered = x.data - x.data.mean(axis=1, keepdims=True)
    std = np.sqrt((centered ** 2).mean(axis=1, keepdims=True) + eps)
    normalized = centered / std
    gain_data = gain.data

    def backward(g):
        g_norm = g * gain_data
        grad_x = (g_norm - g_norm.mean(axis=1, keepdims=True)
                  - normalized * (g_norm * normalized).mean(axis=1, keepdims=True)) / std
        return grad_x, (g * normalized).sum(axis=0), g.sum(axis=0)

    return emit(normalized * gain_data + bias.data, (x, gain, bias), backward, "layer_norm")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight (+ bias)`` with weight stored ``[fan_in x fan_out]``."""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


def total(values: List[Tensor]) -> Tensor:
    """Sum a list of same-shaped tensors."""
    if not values:
        raise ContractError("cannot sum an empty list of tensors")
    result = values[0]
    for value in values[1:]:
        result = add(result, value)
    return result
