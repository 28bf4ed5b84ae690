"""Padded mini-batches with per-sample lengths and frame masks."""
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from model.san import SequenceSample
from utils.errors import ConfigError
from .generator import Dataset


@dataclass
class Batch:
    """Samples padded with zero rows to the longest sequence in the batch."""
    context: np.ndarray  # [B x T_max x D_in]
    hand: np.ndarray  # [B x T'_max x D_in_hand]
    context_lengths: List[int]
    hand_lengths: List[int]
    context_mask: np.ndarray  # bool [B x T_max], True on real frames
    hand_mask: np.ndarray  # bool [B x T'_max]
    targets: List[List[int]]
    indices: List[int]  # Positions of the samples in the dataset

    def __len__(self) -> int:
        return len(self.targets)

    @classmethod
    def stack(cls, samples: List[SequenceSample], indices: Optional[List[int]] = None) -> "Batch":
        if not samples:
            raise ConfigError("cannot batch zero samples")
        context_lengths = [s.context_length for s in samples]
        hand_lengths = [s.hand_length for s in samples]
        t_max, t_hand_max = max(context_lengths), max(hand_lengths)

        context = np.zeros((len(samples), t_max, samples[0].context_frames.shape[1]))
        hand = np.zeros((len(samples), t_hand_max, samples[0].hand_frames.shape[1]))
        for i, s in enumerate(samples):
            context[i, : s.context_length] = s.context_frames[: s.context_length]
            hand[i, : s.hand_length] = s.hand_frames[: s.hand_length]

        return cls(
            context=context,
            hand=hand,
            context_lengths=context_lengths,
            hand_lengths=hand_lengths,
            context_mask=np.arange(t_max)[None, :] < np.asarray(context_lengths)[:, None],
            hand_mask=np.arange(t_hand_max)[None, :] < np.asarray(hand_lengths)[:, None],
            targets=[list(s.target) for s in samples],
            indices=list(indices) if indices is not None else list(range(len(samples))),
        )

    def sample(self, i: int) -> SequenceSample:
        """The ``i``-th sample, still padded, with its true lengths."""
        return SequenceSample(self.context[i], self.hand[i], self.targets[i],
                              self.context_lengths[i], self.hand_lengths[i])

    def samples(self) -> Iterator[SequenceSample]:
        for i in range(len(self)):
            yield self.sample(i)


def make_batches(dataset: Dataset, batch_size: int, shuffle_seed: Optional[int] = None) -> List[Batch]:
    """Split ``dataset`` into padded batches.

    Args:
        dataset: Source samples.
        batch_size: Samples per batch; the last batch may be smaller.
        shuffle_seed: When given, samples are shuffled with this seed first.

    Raises:
        ConfigError: If ``batch_size`` is below 1.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(dataset))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(dataset))
    batches = []
    for start in range(0, len(order), batch_size):
        chunk = [int(i) for i in order[start:start + batch_size]]
        batches.append(Batch.stack([dataset.samples[i] for i in chunk], chunk))
    return batches
