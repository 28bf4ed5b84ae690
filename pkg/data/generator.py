"""Synthetic two-stream gloss sequences with controllable signal placement."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ctc.loss import min_alignment_length
from ctc.vocabulary import GlossVocabulary
from model.san import SequenceSample
from utils.config import GeneratorConfig
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Dataset:
    """Ordered samples sharing one vocabulary."""
    samples: List[SequenceSample]
    vocabulary: GlossVocabulary
    split: str = "train"

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.split == other.split and self.vocabulary == other.vocabulary
                and len(self.samples) == len(other.samples)
                and all(a == b for a, b in zip(self.samples, other.samples)))

    def validate(self) -> None:
        """Check target ids against the vocabulary; train targets must be non-empty."""
        size = len(self.vocabulary)
        for i, sample in enumerate(self.samples):
            if any(not 0 < label < size for label in sample.target):
                raise ConfigError(f"sample {i}: target id outside vocabulary of {size}")
            if self.split == "train" and not sample.target:
                raise ConfigError(f"sample {i}: empty target in train split")

    @property
    def total_glosses(self) -> int:
        return sum(len(s.target) for s in self.samples)


@dataclass
class GlossTemplates:
    """Per-gloss feature prototypes for each stream, fixed per vocabulary."""
    context: np.ndarray  # [V x D_in]
    hand: np.ndarray  # [V x D_in_hand]

    @classmethod
    def draw(cls, cfg: GeneratorConfig) -> "GlossTemplates":
        rng = np.random.default_rng(cfg.template_seed)
        return cls(rng.standard_normal((cfg.vocab_size, cfg.d_in)),
                   rng.standard_normal((cfg.vocab_size, cfg.d_in_hand)))


def subsample_frames(sample: SequenceSample, max_frames: int) -> SequenceSample:
    """Keep ``max_frames`` frames by uniform stride, identically on both streams."""
    steps = sample.context_length
    if max_frames <= 0 or steps <= max_frames:
        return sample
    keep = np.floor(np.arange(max_frames) * steps / max_frames).astype(int)
    return SequenceSample(sample.context_frames[keep], sample.hand_frames[keep], sample.target)


def _draw_target(rng: np.random.Generator, cfg: GeneratorConfig) -> List[int]:
    """Gloss ids in [1, V] without immediate repeats."""
    length = int(rng.integers(cfg.min_glosses, cfg.max_glosses + 1))
    target: List[int] = []
    while len(target) < length:
        gloss = int(rng.integers(1, cfg.vocab_size + 1))
        if not target or gloss != target[-1]:
            target.append(gloss)
    return target


def generate_sample(rng: np.random.Generator, cfg: GeneratorConfig, templates: GlossTemplates) -> SequenceSample:
    """Draw one sample.

    Each gloss emits a run of frames. Hand frames carry ``rho`` times the gloss
    template plus noise; context frames carry ``1 - rho`` times the gloss
    template plus a shared body-context random walk plus noise.
    """
    target = _draw_target(rng, cfg)
    runs = rng.integers(cfg.min_frames_per_gloss, cfg.max_frames_per_gloss + 1, size=len(target))
    labels = np.repeat(np.asarray(target) - 1, runs)
    steps = labels.size

    hand = cfg.rho * templates.hand[labels] + cfg.sigma * rng.standard_normal((steps, cfg.d_in_hand))
    body = np.cumsum(cfg.drift * rng.standard_normal((steps, cfg.d_in)), axis=0)
    context = ((1.0 - cfg.rho) * templates.context[labels] + body
               + cfg.sigma * rng.standard_normal((steps, cfg.d_in)))
    return SequenceSample(context, hand, target)


def generate_dataset(cfg: GeneratorConfig, templates: Optional[GlossTemplates] = None) -> Dataset:
    """Generate ``cfg.samples`` samples; deterministic given the seeds.

    Raises:
        ConfigError: Invalid config, or subsampling left a target without enough frames.
    """
    cfg.validate()
    templates = templates or GlossTemplates.draw(cfg)
    rng = np.random.default_rng(cfg.seed)
    samples = []
    for i in range(cfg.samples):
        sample = subsample_frames(generate_sample(rng, cfg, templates), cfg.max_frames)
        if min_alignment_length(sample.target) > sample.context_length:
            raise ConfigError(f"sample {i}: max_frames={cfg.max_frames} is too few for "
                              f"{len(sample.target)} glosses")
        samples.append(sample)

    dataset = Dataset(samples, GlossVocabulary.synthetic(cfg.vocab_size), cfg.split)
    if cfg.center:
        dataset = center_streams(dataset)
    dataset.validate()
    logger.info("Generated %d %s samples (vocab=%d, rho=%.2f, sigma=%.2f, seed=%d)",
                len(samples), cfg.split, cfg.vocab_size, cfg.rho, cfg.sigma, cfg.seed)
    return dataset


def augment_shift(sample: SequenceSample, rng: np.random.Generator, scale: float) -> SequenceSample:
    """Add one random offset vector per stream to every real frame."""
    if scale <= 0:
        return sample
    context = sample.context_frames.copy()
    hand = sample.hand_frames.copy()
    context[: sample.context_length] += scale * rng.standard_normal(context.shape[1])
    hand[: sample.hand_length] += scale * rng.standard_normal(hand.shape[1])
    return SequenceSample(context, hand, sample.target, sample.context_length, sample.hand_length)


def stream_means(dataset: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Mean real frame of the context and hand streams over a dataset."""
    if not dataset.samples:
        raise ConfigError("cannot take frame means of an empty dataset")
    context = np.vstack([s.context_frames[: s.context_length] for s in dataset.samples])
    hand = np.vstack([s.hand_frames[: s.hand_length] for s in dataset.samples])
    return context.mean(axis=0), hand.mean(axis=0)


def center_streams(dataset: Dataset, means: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Dataset:
    """Subtract per-stream mean frames from every real frame.

    Args:
        dataset: Samples to center; left unchanged.
        means: (context, hand) mean frames, e.g. from the training split.
            Defaults to the dataset's own means.
    """
    context_mean, hand_mean = stream_means(dataset) if means is None else means
    samples = []
    for s in dataset.samples:
        context = s.context_frames.copy()
        hand = s.hand_frames.copy()
        context[: s.context_length] -= context_mean
        hand[: s.hand_length] -= hand_mean
        samples.append(SequenceSample(context, hand, s.target, s.context_length, s.hand_length))
    return Dataset(samples, dataset.vocabulary, dataset.split)
