"""Greedy, prefix beam-search and exhaustive CTC decoding."""
import itertools
import math
from typing import Dict, Iterable, List, Tuple

import numpy as np

from utils.errors import ConfigError, OracleSizeError
from .loss import ORACLE_MAX_PATHS, LogProbLattice, collapse, ctc_log_likelihood
from .vocabulary import BLANK_ID

Prefix = Tuple[int, ...]
# (mass ending in blank, mass ending in the prefix's last label)
Masses = Tuple[float, float]


def greedy_decode(lattice: LogProbLattice) -> List[int]:
    """Collapse of the per-frame argmax path; ties go to the smaller label id."""
    frames = lattice.frames
    if frames.shape[0] == 0:
        return []
    return collapse(np.argmax(frames, axis=1).tolist())


def max_prefixes(steps: int, num_labels: int) -> int:
    """Upper bound on the distinct gloss sequences a ``steps``-frame lattice can collapse to."""
    glosses = num_labels - 1
    return sum(glosses ** k for k in range(steps + 1))


def _log_add(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def _prefix_rank(item: Tuple[Prefix, float]):
    prefix, score = item
    return (-score, prefix)


def _extend(candidates: Dict[Prefix, List[float]], prefix: Prefix, slot: int, score: float) -> None:
    if score == -math.inf:
        return
    masses = candidates.setdefault(prefix, [-math.inf, -math.inf])
    masses[slot] = _log_add(masses[slot], score)


def beam_search(lattice: LogProbLattice, width: int) -> List[Tuple[List[int], float]]:
    """CTC prefix beam search.

    Each retained prefix tracks its blank-ending and label-ending mass
    separately, so alignments that collapse to the same prefix are merged.
    The ``width`` best prefixes by total mass survive each frame; ties prefer
    the lexicographically smaller label sequence.

    Args:
        lattice: Log-probabilities to decode.
        width: Number of distinct prefixes kept per frame.

    Returns:
        (gloss ids, merged log-probability) pairs, best first. Scores are
        exact when no prefix was ever pruned.
    """
    if width < 1:
        raise ConfigError(f"beam width must be >= 1, got {width}")
    frames = lattice.frames
    steps, labels = frames.shape

    beam: Dict[Prefix, Masses] = {(): (0.0, -math.inf)}
    for t in range(steps):
        row = frames[t].tolist()
        candidates: Dict[Prefix, List[float]] = {}
        for prefix, (blank_mass, label_mass) in beam.items():
            total = _log_add(blank_mass, label_mass)
            _extend(candidates, prefix, 0, total + row[BLANK_ID])
            last = prefix[-1] if prefix else None
            for label in range(1, labels):
                if label == last:
                    _extend(candidates, prefix, 1, label_mass + row[label])
                    _extend(candidates, prefix + (label,), 1, blank_mass + row[label])
                else:
                    _extend(candidates, prefix + (label,), 1, total + row[label])
        ranked = sorted(((p, _log_add(*m)) for p, m in candidates.items()), key=_prefix_rank)
        beam = {prefix: tuple(candidates[prefix]) for prefix, _ in ranked[:width]}

    merged = ((prefix, _log_add(*masses)) for prefix, masses in beam.items())
    return [(list(prefix), score) for prefix, score in sorted(merged, key=_prefix_rank)]


def _best_exact(frames: np.ndarray, pool: Iterable[Prefix]) -> Tuple[List[int], float]:
    scored = ((prefix, ctc_log_likelihood(frames, prefix)) for prefix in pool)
    prefix, score = min(scored, key=_prefix_rank)
    return list(prefix), score


def beam_hypothesis(lattice: LogProbLattice, width: int) -> Tuple[List[int], float]:
    """Best gloss sequence found within ``width`` and its exact log-probability.

    Width 1 is the single most probable alignment, collapsed. Wider beams
    also consider every prefix surviving a prefix beam search of each width
    from 2 up to ``width``; candidates are rescored with the exact CTC
    likelihood. The candidate pool only grows with the width, so the returned
    probability never decreases as the beam widens.

    Raises:
        ConfigError: ``width`` is below 1.
    """
    if width < 1:
        raise ConfigError(f"beam width must be >= 1, got {width}")
    frames = lattice.frames
    pool = {tuple(greedy_decode(lattice))}
    for narrower in range(2, width + 1):
        pool.update(tuple(prefix) for prefix, _ in beam_search(lattice, narrower))
    return _best_exact(frames, pool)


def beam_decode(lattice: LogProbLattice, width: int) -> List[int]:
    """Most probable gloss sequence found by prefix beam search."""
    return beam_hypothesis(lattice, width)[0]


def exhaustive_decode(lattice: LogProbLattice, max_paths: int = ORACLE_MAX_PATHS) -> Tuple[List[int], float]:
    """Exact maximum-probability collapsed sequence by enumerating every path."""
    frames = lattice.frames
    steps, labels = frames.shape
    if labels ** steps > max_paths:
        raise OracleSizeError(f"{labels}^{steps} paths exceed the oracle budget of {max_paths}")
    rows = frames.tolist()
    totals: Dict[Prefix, float] = {}
    for path in itertools.product(range(labels), repeat=steps):
        prefix = tuple(collapse(path))
        score = sum(rows[t][a] for t, a in enumerate(path))
        totals[prefix] = _log_add(totals.get(prefix, -math.inf), score)
    prefix, score = min(totals.items(), key=_prefix_rank)
    return list(prefix), score
