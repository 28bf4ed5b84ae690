"""Versioned binary dataset container.

Layout: magic ``SANDS1``, u16 version, split tag, vocabulary strings, u32
sample count, then per sample: u32 T, T', D_in, D_in_hand and target length,
the context and hand frames as little-endian float64, the target ids as u32.
A sha256 of everything before it closes the file.
"""
import logging
from pathlib import Path

from ctc.vocabulary import GlossVocabulary
from model.san import SequenceSample
from utils.binio import BinaryReader, BinaryWriter
from utils.errors import ConfigError, FormatError
from .generator import Dataset

logger = logging.getLogger(__name__)

MAGIC = b"SANDS1"
VERSION = 1
SPLITS = ("train", "dev", "test")


def write_dataset(dataset: Dataset, path: Path) -> None:
    """Write ``dataset`` to ``path``, creating parent directories."""
    writer = BinaryWriter(MAGIC)
    writer.u16(VERSION)
    writer.text(dataset.split)
    writer.strings(dataset.vocabulary.labels)
    writer.u32(len(dataset.samples))
    for sample in dataset.samples:
        sample = sample.trimmed()
        writer.u32(sample.context_length)
        writer.u32(sample.hand_length)
        writer.u32(sample.context_frames.shape[1])
        writer.u32(sample.hand_frames.shape[1])
        writer.u32(len(sample.target))
        writer.floats(sample.context_frames)
        writer.floats(sample.hand_frames)
        writer.ints(sample.target)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(writer.finish())
    logger.info("Wrote %d %s samples to %s", len(dataset), dataset.split, path)


def read_dataset(path: Path) -> Dataset:
    """Read a dataset written by ``write_dataset``.

    Raises:
        FormatError: Unreadable, truncated or corrupted file; carries the byte offset.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read dataset {path}: {e}") from e
    reader = BinaryReader(data, MAGIC, "dataset")
    version = reader.u16("version")
    if version != VERSION:
        raise FormatError(f"unsupported dataset version {version}", offset=len(MAGIC))

    split_offset = reader.offset
    split = reader.text("split")
    if split not in SPLITS:
        raise FormatError(f"unknown split tag {split!r}", offset=split_offset)
    vocabulary = GlossVocabulary(reader.strings("vocabulary"))

    samples = []
    for i in range(reader.u32("sample count")):
        steps, hand_steps, d_in, d_in_hand, target_length = (reader.u32(f"sample {i} header")
                                                             for _ in range(5))
        context = reader.floats((steps, d_in), f"sample {i} context frames")
        hand = reader.floats((hand_steps, d_in_hand), f"sample {i} hand frames")
        target = reader.ints(target_length, f"sample {i} target")
        samples.append(SequenceSample(context, hand, target))
    reader.expect_end()

    dataset = Dataset(samples, vocabulary, split)
    try:
        dataset.validate()
    except ConfigError as e:
        raise FormatError(f"{path}: {e}") from None
    logger.debug("Read %d %s samples from %s", len(dataset), split, path)
    return dataset
