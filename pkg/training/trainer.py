"""Seeded training loop with per-epoch dev evaluation, checkpoints and early stopping."""
import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from core import ops
from core.tensor import Tape, Tensor, backward
from ctc.loss import ctc_loss
from data.batching import Batch, make_batches
from data.dataset_io import read_dataset
from data.generator import Dataset, augment_shift
from model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from model.san import CONTEXT, HEADS, SanParams, SequenceSample, decoding_head, san_forward
from utils.config import Config
from utils.errors import ConfigError, FormatError, InfeasibleTargetError, NonFiniteError, TrainingAbortedError
from utils.statistics import EpochRecord, RunStatistics
from .evaluator import evaluate_params
from .metrics import perplexity
from .optimizer import OptimState, adam_step, clip_gradients, global_grad_norm, xavier_init, zero_grad

logger = logging.getLogger(__name__)

BEST_CHECKPOINT = "best.ckpt"
LAST_CHECKPOINT = "last.ckpt"
METRICS_FILE = "metrics.csv"
CONFIG_FILE = "config.txt"


@dataclass
class RunReport:
    """Append-only epoch history and the best-epoch pointer."""
    variant: str
    decoding_head: str
    epochs: List[EpochRecord] = field(default_factory=list)
    best_epoch: Optional[int] = None
    stopped_early: bool = False

    def append(self, record: EpochRecord) -> None:
        if self.epochs and record.epoch <= self.epochs[-1].epoch:
            raise ConfigError(f"epoch {record.epoch} recorded after epoch {self.epochs[-1].epoch}")
        self.epochs.append(record)

    @property
    def best(self) -> Optional[EpochRecord]:
        for record in self.epochs:
            if record.epoch == self.best_epoch:
                return record
        return None

    @property
    def best_wer(self) -> float:
        best = self.best
        return best.dev_wer[self.decoding_head] if best is not None else math.inf


class Trainer:
    """Trains one model variant on a train/dev pair, writing artifacts to ``out_dir``."""

    def __init__(self, config: Config, train_set: Dataset, dev_set: Dataset, out_dir: Path):
        config.validate()
        self.model_config = config.model
        self.train_config = config.train
        self.config = config
        self.train_set = train_set
        self.dev_set = dev_set
        self.out_dir = Path(out_dir)
        self._check_data()

        self.params = SanParams.create(self.model_config)
        xavier_init(self.params.named_parameters(), self.train_config.seed)
        self.active = self.params.active_parameters(self.model_config.variant)
        self.state = OptimState.from_config(config.optim)

        heads = HEADS if self.model_config.variant.uses_hand else (CONTEXT,)
        self.report = RunReport(self.model_config.variant.value, decoding_head(heads))
        self.stats = RunStatistics(self.out_dir)
        self.start_epoch = 1
        self._best_perplexity = math.inf
        self._stall = 0

    def _check_data(self) -> None:
        if self.train_set.vocabulary != self.dev_set.vocabulary:
            raise ConfigError("train and dev datasets use different vocabularies")
        if self.train_set.vocabulary.gloss_count != self.model_config.vocab_size:
            raise ConfigError(f"model.vocab_size={self.model_config.vocab_size} but the data has "
                              f"{self.train_set.vocabulary.gloss_count} glosses")
        if not self.train_set.samples or not self.dev_set.samples:
            raise ConfigError("train and dev datasets must not be empty")
        sample = self.train_set.samples[0]
        widths = (sample.context_frames.shape[1], sample.hand_frames.shape[1])
        if widths != (self.model_config.d_in, self.model_config.d_in_hand):
            raise ConfigError(f"data frame widths {widths} do not match model.d_in/d_in_hand "
                              f"({self.model_config.d_in}, {self.model_config.d_in_hand})")

    # Checkpoints

    def _checkpoint(self, epoch: int) -> Checkpoint:
        meta = {
            "epoch": str(epoch),
            "best_epoch": str(self.report.best_epoch or 0),
            "best_perplexity": repr(self._best_perplexity),
            "stall": str(self._stall),
            "variant": self.model_config.variant.value,
        }
        meta.update(self.state.to_meta())
        return Checkpoint(self.model_config, self.params, self.train_set.vocabulary, meta, self.state.to_blobs())

    def resume(self, path: Path) -> None:
        """Continue from a checkpoint written by this trainer.

        Restores parameters, the optimizer step counter and moments, the
        early-stopping state and the epoch history stored in ``run.db``.

        Raises:
            ConfigError: The checkpoint was trained with a different model config or vocabulary.
            FormatError: The checkpoint lacks training state.
        """
        checkpoint = load_checkpoint(path)
        if checkpoint.config != self.model_config:
            raise ConfigError(f"checkpoint {path} was trained with a different model config")
        if checkpoint.vocabulary != self.train_set.vocabulary:
            raise ConfigError(f"checkpoint {path} uses a different vocabulary")
        try:
            epoch = int(checkpoint.meta["epoch"])
            best_epoch = int(checkpoint.meta.get("best_epoch", "0"))
            self._best_perplexity = float(checkpoint.meta.get("best_perplexity", "inf"))
            self._stall = int(checkpoint.meta.get("stall", "0"))
        except (KeyError, ValueError) as e:
            raise FormatError(f"checkpoint {path} has no usable training state: {e}") from None

        named = self.params.named_parameters()
        for name, tensor in checkpoint.params.named_parameters().items():
            named[name].data = tensor.data.copy()
        self.state.restore(checkpoint.meta, checkpoint.extra, named)

        self.stats.truncate_after(epoch)
        self.report.epochs = self.stats.get_history()
        self.report.best_epoch = self.stats.get_best_epoch(self.report.decoding_head) or best_epoch or None
        self.start_epoch = epoch + 1
        logger.info("Resumed from %s at epoch %d (optimizer step %d)", path, epoch, self.state.step)

    # Training

    def _epoch_rng(self, epoch: int) -> np.random.Generator:
        return np.random.default_rng([self.train_config.seed, epoch])

    def _sample_losses(self, sample: SequenceSample, rng: np.random.Generator,
                       epoch: int, batch_no: int) -> Dict[str, Tensor]:
        try:
            lattices = san_forward(sample, self.params, self.model_config, train_mode=True, rng=rng)
        except NonFiniteError as e:
            raise TrainingAbortedError(epoch, batch_no, "forward", str(e)) from e
        losses = {}
        for head, lattice in lattices.items():
            try:
                losses[head] = ctc_loss(lattice, sample.target)
            except (NonFiniteError, InfeasibleTargetError) as e:
                raise TrainingAbortedError(epoch, batch_no, head, str(e)) from e
        return losses

    def train_batch(self, batch: Batch, rng: np.random.Generator, epoch: int,
                    batch_no: int) -> Tuple[float, float]:
        """One optimizer step on the batch loss.

        Each sample contributes its summed-head loss; the batch loss is their
        mean, so the gradient does not scale with the batch size.

        Returns:
            (mean summed-head loss per sample, decoding-head loss summed over the batch).
        """
        zero_grad(self.params.named_parameters())
        with Tape() as tape:
            per_sample = []
            decode_loss = 0.0
            for sample in batch.samples():
                sample = augment_shift(sample, rng, self.train_config.augment_shift)
                losses = self._sample_losses(sample, rng, epoch, batch_no)
                decode_loss += losses[self.report.decoding_head].item()
                per_sample.append(ops.total(list(losses.values())))
            loss = ops.scale(ops.total(per_sample), 1.0 / len(batch))
        backward(tape, loss)

        if not math.isfinite(global_grad_norm(self.active)):
            raise TrainingAbortedError(epoch, batch_no, "gradient", "non-finite gradient norm")
        factor = clip_gradients(self.active, self.state.clip)
        adam_step(self.active, self.state)
        if factor < 1.0:
            logger.debug("Epoch %d batch %d: gradients clipped by %.4f", epoch, batch_no, factor)
        return loss.item(), decode_loss

    def train_epoch(self, epoch: int) -> Tuple[float, float]:
        """Train one epoch; returns (mean summed-head loss per sample, decoding-head perplexity)."""
        rng = self._epoch_rng(epoch)
        batches = make_batches(self.train_set, self.train_config.batch_size,
                               shuffle_seed=int(rng.integers(2 ** 31)))
        total, decode_total = 0.0, 0.0
        for batch_no, batch in enumerate(batches, start=1):
            batch_loss, batch_decode = self.train_batch(batch, rng, epoch, batch_no)
            total += batch_loss * len(batch)
            decode_total += batch_decode
        return total / len(self.train_set), perplexity(decode_total, self.train_set.total_glosses)

    def _update_early_stopping(self, train_perplexity: float) -> bool:
        """True once perplexity stalled for ``patience`` consecutive epochs."""
        if self._best_perplexity - train_perplexity >= self.train_config.tolerance:
            self._best_perplexity = train_perplexity
            self._stall = 0
        else:
            self._stall += 1
        return self._stall >= self.train_config.patience

    def run(self) -> RunReport:
        """Train until ``train.epochs`` or early stopping; returns the run report."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config.save(self.out_dir / CONFIG_FILE)
        if self.start_epoch == 1:
            self.stats.truncate_after(0)
        logger.info("Training variant %s on %d samples (dev %d), %d parameters",
                    self.report.variant, len(self.train_set), len(self.dev_set),
                    sum(t.size for t in self.active.values()))

        for epoch in range(self.start_epoch, self.train_config.epochs + 1):
            started = time.perf_counter()
            train_loss, train_perplexity = self.train_epoch(epoch)
            result = evaluate_params(self.params, self.model_config, self.dev_set,
                                     self.train_config.beam_width, self.train_config.eval_workers)
            record = EpochRecord(epoch, train_loss, train_perplexity, dict(result.head_wer),
                                 time.perf_counter() - started)
            self.report.append(record)
            self.stats.log_epoch(record)

            logger.info("Epoch %d/%d loss=%.4f ppl=%.4f dev %s (%.1fs)", epoch, self.train_config.epochs,
                        train_loss, train_perplexity,
                        " ".join(f"{h}={w:.4f}" for h, w in record.dev_wer.items()), record.wall_time)

            stop = self._update_early_stopping(train_perplexity)
            if record.dev_wer[self.report.decoding_head] < self.report.best_wer:
                self.report.best_epoch = epoch
                save_checkpoint(self.out_dir / BEST_CHECKPOINT, self._checkpoint(epoch))
                logger.info("New best %s dev WER %.4f at epoch %d", self.report.decoding_head,
                            record.dev_wer[self.report.decoding_head], epoch)
            save_checkpoint(self.out_dir / LAST_CHECKPOINT, self._checkpoint(epoch))
            write_metrics_csv(self.report, self.out_dir / METRICS_FILE)

            if stop:
                self.report.stopped_early = True
                logger.info("Train perplexity stalled for %d epochs; stopping at epoch %d",
                            self.train_config.patience, epoch)
                break

        summary = self.stats.get_summary()
        logger.info("Run finished after %d epochs (%.1fs); best dev WER %s; best epoch %s",
                    summary["epochs"], summary["total_wall_time"],
                    " ".join(f"{h}={w:.4f}" for h, w in summary["best_dev_wer"].items()),
                    self.report.best_epoch)
        return self.report


def write_metrics_csv(report: RunReport, path: Path) -> None:
    """Rewrite the learning-curve CSV from the full history."""
    heads = sorted({head for record in report.epochs for head in record.dev_wer})
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "train_perplexity"] + [f"dev_wer_{h}" for h in heads]
                        + ["wall_time", "best"])
        for record in report.epochs:
            writer.writerow([record.epoch, f"{record.train_loss:.8f}", f"{record.perplexity:.8f}"]
                            + [f"{record.dev_wer[h]:.6f}" if h in record.dev_wer else "" for h in heads]
                            + [f"{record.wall_time:.3f}", int(record.epoch == report.best_epoch)])


def train(config: Config, train_path: Path, dev_path: Path, out_dir: Path,
          resume: Optional[Path] = None) -> RunReport:
    """Read the datasets, train, and leave best/last checkpoints in ``out_dir``."""
    trainer = Trainer(config, read_dataset(train_path), read_dataset(dev_path), out_dir)
    if resume is not None:
        trainer.resume(resume)
    return trainer.run()
