"""Beam-search decoding, corpus WER per head, reports and attention dumps."""
import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ctc.decoding import beam_decode
from ctc.vocabulary import GlossVocabulary
from data.batching import make_batches
from data.generator import Dataset
from model.checkpoint import Checkpoint
from model.san import SanParams, SequenceSample, decoding_head, head_losses, san_forward
from utils.config import SanConfig
from utils.errors import ConfigError, InfeasibleTargetError
from utils.heatmap import save_heatmap
from .metrics import WerCounts, edit_distance, perplexity

logger = logging.getLogger(__name__)


@dataclass
class SampleResult:
    """Decoded hypotheses of one sample, one per head."""
    index: int
    reference: List[int]
    hypotheses: Dict[str, List[int]]


@dataclass
class EvaluationResult:
    head_wer: Dict[str, float]
    decoding_head: str
    samples: List[SampleResult] = field(default_factory=list)
    loss: Optional[float] = None  # Mean summed-head CTC loss per sample
    perplexity: Optional[float] = None  # Decoding head

    @property
    def wer(self) -> float:
        """Corpus WER of the decoding head."""
        return self.head_wer[self.decoding_head]


def decode_sample(sample: SequenceSample, params: SanParams, config: SanConfig,
                  beam_width: int) -> Dict[str, List[int]]:
    """Beam-decode every head of one (possibly padded) sample."""
    lattices = san_forward(sample, params, config)
    return {head: beam_decode(lattice, beam_width) for head, lattice in lattices.items()}


def _indexed_samples(dataset: Dataset, batch_size: int) -> List[Tuple[int, SequenceSample]]:
    return [(index, sample) for batch in make_batches(dataset, batch_size)
            for index, sample in zip(batch.indices, batch.samples())]


def evaluate_params(params: SanParams, config: SanConfig, dataset: Dataset, beam_width: int = 10,
                    workers: int = 1, batch_size: int = 1) -> EvaluationResult:
    """Decode ``dataset`` and score each head with micro-averaged WER.

    Args:
        params: Model parameters; only read.
        config: Model configuration.
        dataset: Samples to decode.
        beam_width: CTC beam width.
        workers: Threads decoding samples in parallel.
        batch_size: Samples are decoded inside padded batches of this size.
    """
    items = _indexed_samples(dataset, batch_size)

    def run(item: Tuple[int, SequenceSample]) -> SampleResult:
        index, sample = item
        return SampleResult(index, list(sample.target), decode_sample(sample, params, config, beam_width))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(run, items))
    else:
        samples = [run(item) for item in items]

    counts: Dict[str, WerCounts] = {}
    for result in samples:
        for head, hypothesis in result.hypotheses.items():
            counts.setdefault(head, WerCounts()).add(result.reference, hypothesis)
    head_wer = {head: c.wer for head, c in counts.items()}
    chosen = decoding_head(head_wer)
    return EvaluationResult(head_wer, chosen, samples)


def dataset_loss(params: SanParams, config: SanConfig, dataset: Dataset) -> Tuple[float, float]:
    """Mean summed-head CTC loss per sample and decoding-head perplexity, without dropout."""
    total, decode_total = 0.0, 0.0
    for sample in dataset.samples:
        losses = head_losses(san_forward(sample, params, config), sample.target)
        total += sum(loss.item() for loss in losses.values())
        decode_total += losses[decoding_head(losses)].item()
    return total / max(1, len(dataset)), perplexity(decode_total, dataset.total_glosses)


def check_vocabulary(checkpoint: Checkpoint, dataset: Dataset) -> None:
    if checkpoint.vocabulary != dataset.vocabulary:
        raise ConfigError(f"checkpoint vocabulary ({len(checkpoint.vocabulary)} labels) does not match "
                          f"dataset vocabulary ({len(dataset.vocabulary)} labels)")


def evaluate(checkpoint: Checkpoint, dataset: Dataset, beam_width: int = 10, workers: int = 1,
             batch_size: int = 1, report_path: Optional[Path] = None) -> EvaluationResult:
    """Evaluate a checkpoint and optionally write the per-sample CSV report.

    Raises:
        ConfigError: Checkpoint and dataset vocabularies differ.
    """
    check_vocabulary(checkpoint, dataset)
    result = evaluate_params(checkpoint.params, checkpoint.config, dataset, beam_width, workers, batch_size)
    try:
        result.loss, result.perplexity = dataset_loss(checkpoint.params, checkpoint.config, dataset)
    except InfeasibleTargetError as e:
        logger.warning("Skipping dataset loss: %s", e)
    logger.info("Evaluated %d %s samples: %s", len(dataset), dataset.split,
                ", ".join(f"{head} WER={value:.4f}" for head, value in result.head_wer.items()))
    if report_path is not None:
        write_report(result, report_path, checkpoint.vocabulary)
    return result


def write_report(result: EvaluationResult, path: Path, vocabulary: GlossVocabulary) -> None:
    """CSV with one row per (sample, head): reference, hypothesis, errors and WER."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["sample", "head", "reference", "hypothesis", "errors", "wer"])
        for sample in result.samples:
            reference = vocabulary.decode(sample.reference)
            for head, ids in sample.hypotheses.items():
                errors = edit_distance(sample.reference, ids)
                sample_wer = errors / len(reference) if reference else math.nan
                writer.writerow([sample.index, head, " ".join(reference),
                                 " ".join(vocabulary.decode(ids)), errors, f"{sample_wer:.6f}"])
    logger.info("Wrote evaluation report to %s", path)


def decode_dataset(checkpoint: Checkpoint, dataset: Dataset, beam_width: int = 10,
                   limit: Optional[int] = None, attention_dir: Optional[Path] = None) -> List[SampleResult]:
    """Decode the first ``limit`` samples, optionally dumping attention weights.

    With ``attention_dir`` every weight matrix is written as CSV and PNG,
    named ``sample{i}_{layer}_head{h}.csv`` / ``.png``, where layer is
    ``context_layer{n}``, ``hand_layer{n}`` or ``fusion``.
    """
    check_vocabulary(checkpoint, dataset)
    if attention_dir is not None:
        Path(attention_dir).mkdir(parents=True, exist_ok=True)
    count = len(dataset) if limit is None else min(limit, len(dataset))
    results = []
    for index in range(count):
        sample = dataset.samples[index]
        log: Optional[Dict[str, List[np.ndarray]]] = {} if attention_dir is not None else None
        lattices = san_forward(sample, checkpoint.params, checkpoint.config, attention_log=log)
        hypotheses = {head: beam_decode(lattice, beam_width) for head, lattice in lattices.items()}
        results.append(SampleResult(index, list(sample.target), hypotheses))
        for layer, matrices in (log or {}).items():
            for head, weights in enumerate(matrices):
                stem = Path(attention_dir) / f"sample{index:04d}_{layer}_head{head}"
                np.savetxt(stem.with_suffix(".csv"), weights, delimiter=",", fmt="%.8f")
                save_heatmap(weights, stem.with_suffix(".png"))
    if attention_dir is not None:
        logger.info("Dumped attention of %d samples to %s", count, attention_dir)
    return results
