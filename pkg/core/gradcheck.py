"""Central-difference gradient checking."""
from typing import Callable

import numpy as np

from .tensor import Tape, Tensor, backward


def numerical_gradient(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time.

    ``f`` is evaluated without a tape; ``x`` is restored after each perturbation.
    """
    grad = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = f(x).item()
        flat[i] = original - h
        minus = f(x).item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def analytic_gradient(f: Callable[[Tensor], Tensor], x: Tensor) -> np.ndarray:
    """Gradient of ``f`` at ``x`` from one backward pass."""
    saved = x.grad
    requires = x.requires_grad
    x.grad = None
    x.requires_grad = True
    try:
        with Tape() as tape:
            loss = f(x)
        backward(tape, loss)
        return x.grad.copy() if x.grad is not None else np.zeros_like(x.data)
    finally:
        x.grad = saved
        x.requires_grad = requires


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """Largest relative disagreement between backward and central differences.

    Each coordinate contributes ``|a - n| / max(1, |a| + |n|)``.

    Args:
        f: Scalar function of ``x``; must be deterministic across calls.
        x: Point to check at.
        h: Finite-difference step.

    Returns:
        Maximum relative error over all coordinates of ``x``.
    """
    analytic = analytic_gradient(f, x)
    numeric = numerical_gradient(f, x, h)
    denom = np.maximum(1.0, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom)) if x.size else 0.0
