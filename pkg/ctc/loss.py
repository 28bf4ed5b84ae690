"""CTC loss by log-space forward-backward, plus an exhaustive enumeration oracle."""
import itertools
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from core.ops import emit
from core.tensor import Tensor
from utils.errors import ContractError, InfeasibleTargetError, OracleSizeError
from .vocabulary import BLANK_ID

NEG_INF = -math.inf
ORACLE_MAX_PATHS = 10 ** 7


@dataclass
class LogProbLattice:
    """Per-frame log-probabilities over the extended vocabulary.

    Rows at or beyond ``length`` are padding and never read.
    """
    log_probs: Tensor  # [T x |L'|]
    length: int

    def __post_init__(self):
        if self.length is None:
            self.length = self.log_probs.shape[0]
        if not 0 <= self.length <= self.log_probs.shape[0]:
            raise ContractError(f"lattice length {self.length} exceeds {self.log_probs.shape[0]} rows")

    @classmethod
    def from_array(cls, log_probs: np.ndarray, length: int = None) -> "LogProbLattice":
        log_probs = np.asarray(log_probs, dtype=np.float64)
        return cls(Tensor(log_probs), log_probs.shape[0] if length is None else length)

    @property
    def frames(self) -> np.ndarray:
        """Valid rows ``[length x |L'|]``."""
        return self.log_probs.data[: self.length]

    @property
    def num_labels(self) -> int:
        return self.log_probs.shape[1]

    def is_normalized(self, tol: float = 1e-9) -> bool:
        """Each valid row log-sum-exps to zero."""
        frames = self.frames
        if frames.size == 0:
            return True
        peak = frames.max(axis=1, keepdims=True)
        lse = peak[:, 0] + np.log(np.exp(frames - peak).sum(axis=1))
        return bool(np.all(np.abs(lse) < tol))


def collapse(path: Sequence[int]) -> List[int]:
    """Merge adjacent repeats, then drop blanks."""
    out = []
    previous = None
    for label in path:
        if label != previous and label != BLANK_ID:
            out.append(int(label))
        previous = label
    return out


def min_alignment_length(target: Sequence[int]) -> int:
    """Frames needed to emit ``target``: one per gloss plus a blank between repeats."""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _check_target(target: Sequence[int], num_labels: int) -> None:
    for label in target:
        if not 0 < label < num_labels:
            raise ContractError(f"target label {label} must be a gloss id in [1, {num_labels})")


def _extend(target: Sequence[int]) -> np.ndarray:
    """Blank-interleaved label sequence ``[ε, y1, ε, y2, ..., ε]``."""
    ext = np.full(2 * len(target) + 1, BLANK_ID, dtype=np.int64)
    ext[1::2] = target
    return ext


def _skip_allowed(ext: np.ndarray) -> np.ndarray:
    """Whether state ``s`` may be entered from ``s - 2``."""
    skip = np.zeros(ext.size, dtype=bool)
    skip[2:] = (ext[2:] != BLANK_ID) & (ext[2:] != ext[:-2])
    return skip


def _log_alpha(emissions: np.ndarray, skip: np.ndarray) -> np.ndarray:
    steps, states = emissions.shape
    alpha = np.full((steps, states), NEG_INF)
    alpha[0, :2] = emissions[0, :2]
    for t in range(1, steps):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emissions[t]
    return alpha


def _log_beta(emissions: np.ndarray, skip: np.ndarray) -> np.ndarray:
    """Log-probability of finishing from state ``s`` after frame ``t`` (emission at ``t`` excluded)."""
    steps, states = emissions.shape
    beta = np.full((steps, states), NEG_INF)
    beta[-1, -1] = 0.0
    if states > 1:
        beta[-1, -2] = 0.0
    for t in range(steps - 2, -1, -1):
        nxt = beta[t + 1] + emissions[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc
    return beta


def _final_log_prob(alpha: np.ndarray) -> float:
    last = alpha[-1]
    return float(np.logaddexp(last[-1], last[-2])) if last.size > 1 else float(last[-1])


def ctc_log_likelihood(frames: np.ndarray, target: Sequence[int]) -> float:
    """``log P(target | frames)``; ``-inf`` when the target cannot fit."""
    frames = np.asarray(frames, dtype=np.float64)
    _check_target(target, frames.shape[1])
    if frames.shape[0] == 0:
        return 0.0 if not target else NEG_INF
    if min_alignment_length(target) > frames.shape[0]:
        return NEG_INF
    ext = _extend(target)
    alpha = _log_alpha(frames[:, ext], _skip_allowed(ext))
    return _final_log_prob(alpha)


def ctc_loss_value(lattice: LogProbLattice, target: Sequence[int]) -> float:
    """``-log P(target | lattice)`` as a float; ``inf`` for an infeasible target."""
    return -ctc_log_likelihood(lattice.frames, target)


def ctc_loss_and_grad(frames: np.ndarray, target: Sequence[int]) -> Tuple[float, np.ndarray]:
    """Loss and its gradient with respect to the log-probabilities.

    The gradient is minus the posterior occupancy of each (frame, label).

    Raises:
        InfeasibleTargetError: The target needs more frames than available.
    """
    frames = np.asarray(frames, dtype=np.float64)
    _check_target(target, frames.shape[1])
    steps = frames.shape[0]
    needed = min_alignment_length(target)
    if needed > steps:
        raise InfeasibleTargetError(len(target), needed, steps)
    grad = np.zeros_like(frames)
    if steps == 0:
        return 0.0, grad

    ext = _extend(target)
    skip = _skip_allowed(ext)
    emissions = frames[:, ext]
    alpha = _log_alpha(emissions, skip)
    beta = _log_beta(emissions, skip)
    log_p = _final_log_prob(alpha)

    occupancy = np.exp(alpha + beta - log_p)
    np.add.at(grad, (np.arange(steps)[:, None], ext[None, :]), -occupancy)
    return -log_p, grad


def ctc_loss(lattice: LogProbLattice, target: Sequence[int]) -> Tensor:
    """Differentiable CTC negative log-likelihood of ``target``.

    Padded lattice rows receive zero gradient.

    Raises:
        InfeasibleTargetError: The target needs more frames than ``lattice.length``.
    """
    length = lattice.length
    loss, grad_valid = ctc_loss_and_grad(lattice.frames, target)
    shape = lattice.log_probs.shape

    def backward(g):
        full = np.zeros(shape)
        full[:length] = grad_valid * g
        return (full,)

    return emit(np.array(loss), (lattice.log_probs,), backward, "ctc_loss")


def ctc_enumerate_oracle(lattice: LogProbLattice, target: Sequence[int],
                         max_paths: int = ORACLE_MAX_PATHS) -> float:
    """Brute-force ``-log`` of the summed probability of every collapsing path.

    Raises:
        OracleSizeError: ``|L'|^T`` exceeds ``max_paths``.
    """
    frames = lattice.frames
    steps, labels = frames.shape
    _check_target(target, labels)
    if labels ** steps > max_paths:
        raise OracleSizeError(f"{labels}^{steps} paths exceed the oracle budget of {max_paths}")

    rows = frames.tolist()
    wanted = list(target)
    log_total = NEG_INF
    for path in itertools.product(range(labels), repeat=steps):
        if collapse(path) == wanted:
            log_total = np.logaddexp(log_total, sum(rows[t][a] for t, a in enumerate(path)))
    return -float(log_total)
