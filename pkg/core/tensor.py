"""Dense 64-bit tensor with a reverse-mode differentiation tape."""
import threading
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from utils.errors import ContractError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """Row-major float64 array that may take part in a differentiation tape.

    Tensors created with ``requires_grad=True`` are leaves (parameters);
    op outputs inherit ``requires_grad`` when recorded on an active tape.
    """

    __slots__ = ("data", "grad", "requires_grad", "tape_node", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.tape_node: Optional["TapeNode"] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        """Copy of the values, detached from any tape."""
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar routes through the differentiable ops
    def __add__(self, other: "Tensor") -> "Tensor":
        from .ops import add
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from .ops import mul
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from .ops import matmul
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        from .ops import transpose
        return transpose(self)


@dataclass(eq=False)
class TapeNode:
    """One recorded operation."""
    index: int
    op: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    backward: BackwardFn
    tape: "Tape"


@dataclass(eq=False)
class Tape:
    """Ordered record of operations; recording order is a topological order.

    Use as a context manager to make it the active tape of the current thread.
    """
    nodes: List[TapeNode] = field(default_factory=list)
    visits: int = 0
    _previous: Optional["Tape"] = field(default=None, repr=False)

    def record(self, output: Tensor, inputs: Sequence[Tensor], backward: BackwardFn, op: str) -> TapeNode:
        node = TapeNode(len(self.nodes), op, output, tuple(inputs), backward, self)
        self.nodes.append(node)
        output.tape_node = node
        output.requires_grad = True
        return node

    def __len__(self) -> int:
        return len(self.nodes)

    def __enter__(self) -> "Tape":
        self._previous = active_tape()
        _state.tape = self
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        _state.tape = self._previous
        self._previous = None


class _TapeState(threading.local):
    tape: Optional[Tape] = None


_state = _TapeState()


def active_tape() -> Optional[Tape]:
    """The tape ops record onto in this thread, if any."""
    return _state.tape


def is_recorded_on(tensor: Tensor, tape: Tape) -> bool:
    return tensor.tape_node is not None and tensor.tape_node.tape is tape


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate ``grad`` on every leaf that ``loss`` depends on.

    Leaf gradients accumulate across calls; call ``zero_grad`` between steps.

    Args:
        tape: Tape the loss was computed on.
        loss: Scalar (single-element) tensor recorded on ``tape``.

    Raises:
        ContractError: If the seed is not a scalar or was not recorded on the tape.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward seed must be a scalar, got shape {loss.shape}")
    if not is_recorded_on(loss, tape):
        raise ContractError("loss is not reachable from any parameter on this tape")

    pending = {id(loss): np.ones_like(loss.data)}
    tape.visits = 0
    for node in reversed(tape.nodes):
        tape.visits += 1
        upstream = pending.pop(id(node.output), None)
        if upstream is None:
            continue
        for tensor, grad in zip(node.inputs, node.backward(upstream)):
            if grad is None or not tensor.requires_grad:
                continue
            if is_recorded_on(tensor, tape):
                key = id(tensor)
                pending[key] = grad if key not in pending else pending[key] + grad
            else:
                tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
