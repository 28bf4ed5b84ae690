"""Exception hierarchy shared by every package."""
from typing import Optional


class SanError(Exception):
    """Base class for all recognizer errors."""


class DimensionError(SanError):
    """Operand shapes do not agree."""


class DegenerateRowError(SanError):
    """A softmax row for a real (non-padding) query has no allowed key."""


class NonFiniteError(SanError):
    """A forward operation produced NaN or Inf."""

    def __init__(self, op: str, message: str = ""):
        self.op = op
        super().__init__(f"non-finite values produced by '{op}'" + (f": {message}" if message else ""))


class ContractError(SanError):
    """A documented precondition was violated by the caller."""


class ConfigError(SanError):
    """Invalid configuration value or file."""


class FormatError(SanError):
    """Corrupt or unsupported binary container."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class OracleSizeError(SanError):
    """Exhaustive enumeration would exceed the path budget."""


class InfeasibleTargetError(SanError):
    """No alignment of length T can collapse to the target."""

    def __init__(self, target_length: int, min_length: int, frames: int, head: str = ""):
        self.target_length = target_length
        self.min_length = min_length
        self.frames = frames
        self.head = head
        where = f" on head '{head}'" if head else ""
        super().__init__(
            f"infeasible target{where}: {target_length} glosses need at least "
            f"{min_length} frames, got {frames}"
        )

    def with_head(self, head: str) -> "InfeasibleTargetError":
        """Return a copy tagged with the output head that raised it."""
        return InfeasibleTargetError(self.target_length, self.min_length, self.frames, head)


class TrainingAbortedError(SanError):
    """Training stopped on a non-finite or infeasible loss."""

    def __init__(self, epoch: int, batch: int, head: str, reason: str):
        self.epoch = epoch
        self.batch = batch
        self.head = head
        super().__init__(f"training aborted at epoch {epoch}, batch {batch}, head '{head}': {reason}")
