"""Versioned binary checkpoints of model parameters."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict

import numpy as np

from core.tensor import Tensor
from ctc.vocabulary import GlossVocabulary
from utils.binio import BinaryReader, BinaryWriter
from utils.config import SanConfig, parse_key_values, record_from_items, record_to_lines
from utils.errors import ConfigError, FormatError
from .san import SanParams

logger = logging.getLogger(__name__)

MAGIC = b"SANCKPT"
VERSION = 1


@dataclass
class Checkpoint:
    """Everything needed to rebuild a model, plus optional training state."""
    config: SanConfig
    params: SanParams
    vocabulary: GlossVocabulary
    meta: Dict[str, str] = field(default_factory=dict)  # e.g. epoch, optimizer step
    extra: Dict[str, np.ndarray] = field(default_factory=dict)  # e.g. optimizer moments


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    """Write header, vocabulary, parameter blobs and a trailing sha256.

    Layout: magic, u16 version, header text (``key = value`` lines), vocabulary
    strings, u32 blob count, then per blob: name, u8 ndim, u32 dims,
    little-endian float64 data.
    """
    lines = list(record_to_lines("model", checkpoint.config))
    lines.extend(f"meta.{key} = {value}" for key, value in checkpoint.meta.items())

    writer = BinaryWriter(MAGIC)
    writer.u16(VERSION)
    writer.text("\n".join(lines) + "\n")
    writer.strings(checkpoint.vocabulary.labels)

    blobs = dict(checkpoint.params.named_parameters())
    for name, array in checkpoint.extra.items():
        if name in blobs:
            raise ConfigError(f"extra blob {name!r} collides with a parameter name")
        blobs[name] = array
    writer.u32(len(blobs))
    for name, value in blobs.items():
        data = np.asarray(value.data if isinstance(value, Tensor) else value, dtype=np.float64)
        writer.text(name)
        writer.u8(data.ndim)
        for dim in data.shape:
            writer.u32(dim)
        writer.floats(data)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(writer.finish())
    logger.debug("Saved checkpoint %s (%d blobs)", path, len(blobs))


def load_checkpoint(path: Path) -> Checkpoint:
    """Read a checkpoint written by ``save_checkpoint``.

    Raises:
        FormatError: Bad magic, unsupported version, checksum mismatch,
            truncation, or blobs that do not fit the stored config.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read checkpoint {path}: {e}") from e
    reader = BinaryReader(data, MAGIC, "checkpoint")
    version = reader.u16("version")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=len(MAGIC))

    header_offset = reader.offset
    try:
        items = {key: value for key, value, _ in parse_key_values(reader.text("header"), str(path))}
        config = record_from_items(SanConfig, "model", items)
        config.validate()
    except ConfigError as e:
        raise FormatError(f"bad checkpoint header: {e}", offset=header_offset) from None
    meta = {key.partition(".")[2]: value for key, value in items.items() if key.startswith("meta.")}
    vocabulary = GlossVocabulary(reader.strings("vocabulary"))

    params = SanParams.create(config)
    named = params.named_parameters()
    extra: Dict[str, np.ndarray] = {}
    seen = set()
    for _ in range(reader.u32("blob count")):
        blob_offset = reader.offset
        name = reader.text("blob name")
        shape = tuple(reader.u32("blob dim") for _ in range(reader.u8("blob rank")))
        values = reader.floats(shape, f"blob {name}")
        if name in named:
            if named[name].shape != shape:
                raise FormatError(f"blob {name} has shape {shape}, expected {named[name].shape}",
                                  offset=blob_offset)
            named[name].data = values
            seen.add(name)
        else:
            extra[name] = values
    reader.expect_end()

    missing = set(named) - seen
    if missing:
        raise FormatError(f"checkpoint lacks {len(missing)} parameters, e.g. {sorted(missing)[0]}")
    return Checkpoint(config, params, vocabulary, meta, extra)
