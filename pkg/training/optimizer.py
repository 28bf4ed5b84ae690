"""Xavier initialization, global-norm gradient clipping and Adam."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from core.tensor import Tensor
from utils.config import OptimizerConfig
from utils.errors import ContractError, FormatError

logger = logging.getLogger(__name__)

MOMENT_PREFIX = "optim.m."
VELOCITY_PREFIX = "optim.v."


def xavier_init(params: Mapping[str, Tensor], seed: int) -> None:
    """Initialize in place, visiting parameters in their fixed order.

    Matrices ``[fan_in x fan_out]`` are drawn uniform in
    ``±sqrt(6 / (fan_in + fan_out))``; norm gains are set to one and every
    other vector (biases) to zero.
    """
    rng = np.random.default_rng(seed)
    for name, tensor in params.items():
        if tensor.data.ndim == 2:
            fan_in, fan_out = tensor.shape
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            tensor.data = rng.uniform(-limit, limit, size=tensor.shape)
        elif name.endswith(".gain"):
            tensor.data = np.ones(tensor.shape)
        else:
            tensor.data = np.zeros(tensor.shape)
        tensor.grad = None


def zero_grad(params: Mapping[str, Tensor]) -> None:
    for tensor in params.values():
        tensor.zero_grad()


def global_grad_norm(params: Mapping[str, Tensor]) -> float:
    total = sum(float(np.sum(t.grad * t.grad)) for t in params.values() if t.grad is not None)
    return math.sqrt(total)


def clip_gradients(params: Mapping[str, Tensor], threshold: float) -> float:
    """Rescale all gradients so their global L2 norm is at most ``threshold``.

    Returns:
        The factor applied; 1.0 when the norm was already within bounds.
    """
    if threshold <= 0:
        raise ContractError(f"clip threshold must be positive, got {threshold}")
    norm = global_grad_norm(params)
    if norm <= threshold:
        return 1.0
    factor = threshold / norm
    for tensor in params.values():
        if tensor.grad is not None:
            tensor.grad = tensor.grad * factor
    return factor


@dataclass
class OptimState:
    """Adam moment buffers keyed by parameter name, plus hyperparameters."""
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 1.0
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_config(cls, cfg: OptimizerConfig) -> "OptimState":
        cfg.validate()
        return cls(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps, clip=cfg.clip)

    def to_blobs(self) -> Dict[str, np.ndarray]:
        blobs = {f"{MOMENT_PREFIX}{name}": value for name, value in self.m.items()}
        blobs.update({f"{VELOCITY_PREFIX}{name}": value for name, value in self.v.items()})
        return blobs

    def to_meta(self) -> Dict[str, str]:
        return {"optim_step": str(self.step)}

    def restore(self, meta: Mapping[str, str], blobs: Mapping[str, np.ndarray],
                params: Mapping[str, Tensor]) -> None:
        """Load the step counter and moments saved with ``to_meta``/``to_blobs``.

        Raises:
            FormatError: Moments that do not match the parameters.
        """
        try:
            self.step = int(meta.get("optim_step", "0"))
        except ValueError:
            raise FormatError(f"bad optimizer step {meta.get('optim_step')!r}") from None
        self.m, self.v = {}, {}
        for name, value in blobs.items():
            for prefix, target in ((MOMENT_PREFIX, self.m), (VELOCITY_PREFIX, self.v)):
                if not name.startswith(prefix):
                    continue
                param_name = name[len(prefix):]
                if param_name not in params or params[param_name].shape != value.shape:
                    raise FormatError(f"optimizer blob {name} does not match any parameter")
                target[param_name] = np.array(value)
        logger.debug("Restored optimizer at step %d with %d moment buffers", self.step, len(self.m))


def adam_step(params: Mapping[str, Tensor], state: OptimState) -> None:
    """One bias-corrected Adam update of every parameter that has a gradient."""
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, tensor in params.items():
        if tensor.grad is None:
            continue
        if tensor.grad.shape != tensor.shape:
            raise ContractError(f"gradient of {name} has shape {tensor.grad.shape}, expected {tensor.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(tensor.data)
            v = np.zeros_like(tensor.data)
        m = state.beta1 * m + (1.0 - state.beta1) * tensor.grad
        v = state.beta2 * v + (1.0 - state.beta2) * tensor.grad ** 2
        state.m[name], state.v[name] = m, v
        tensor.data = tensor.data - state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
