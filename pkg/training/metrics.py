"""Word error rate and perplexity."""
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence, Tuple

from utils.errors import ContractError


def edit_distance(reference: Sequence[Hashable], hypothesis: Sequence[Hashable]) -> int:
    """Unit-cost Levenshtein distance (deletions + insertions + substitutions)."""
    previous = list(range(len(hypothesis) + 1))
    for i, ref_item in enumerate(reference, start=1):
        current = [i] + [0] * len(hypothesis)
        for j, hyp_item in enumerate(hypothesis, start=1):
            current[j] = min(previous[j] + 1,  # deletion
                             current[j - 1] + 1,  # insertion
                             previous[j - 1] + (ref_item != hyp_item))
        previous = current
    return previous[-1]


def wer(reference: Sequence[Hashable], hypothesis: Sequence[Hashable]) -> float:
    """Edit distance over reference length; can exceed 1.

    Raises:
        ContractError: If the reference is empty.
    """
    if not reference:
        raise ContractError("WER is undefined for an empty reference")
    return edit_distance(reference, hypothesis) / len(reference)


@dataclass
class WerCounts:
    """Summed edit operations and reference lengths."""
    errors: int = 0
    reference_length: int = 0

    def add(self, reference: Sequence[Hashable], hypothesis: Sequence[Hashable]) -> int:
        errors = edit_distance(reference, hypothesis)
        self.errors += errors
        self.reference_length += len(reference)
        return errors

    @property
    def wer(self) -> float:
        if self.reference_length == 0:
            raise ContractError("WER is undefined for an empty reference")
        return self.errors / self.reference_length


def corpus_wer(pairs: Iterable[Tuple[Sequence[Hashable], Sequence[Hashable]]]) -> float:
    """Micro-averaged WER over (reference, hypothesis) pairs."""
    counts = WerCounts()
    for reference, hypothesis in pairs:
        counts.add(reference, hypothesis)
    return counts.wer


def perplexity(total_ctc_loss: float, total_target_glosses: int) -> float:
    """``exp(total loss / total reference glosses)``.

    Raises:
        ContractError: If the gloss count is not positive.
    """
    if total_target_glosses <= 0:
        raise ContractError(f"perplexity needs a positive gloss count, got {total_target_glosses}")
    try:
        return math.exp(total_ctc_loss / total_target_glosses)
    except OverflowError:
        return math.inf
