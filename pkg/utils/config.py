"""Configuration records and the flat ``key = value`` config file format."""
import dataclasses
import logging
import typing
from dataclasses import dataclass, asdict, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Type

from .errors import ConfigError

logger = logging.getLogger(__name__)


class Variant(Enum):
    """Model variant, in ablation order."""
    CONTEXT = "context"  # SAN, context stream only
    HAND = "hand"  # + Hand Stream
    RELMASK = "relmask"  # + Relative Local Masking

    @property
    def uses_hand(self) -> bool:
        return self is not Variant.CONTEXT

    @property
    def uses_relative_mask(self) -> bool:
        return self is Variant.RELMASK


@dataclass
class SanConfig:
    """Model hyperparameters."""
    # Input widths
    d_in: int = 16  # Context frame feature width
    d_in_hand: int = 16  # Hand frame feature width

    # Encoder shape
    d_model: int = 64
    heads: int = 4
    d_k: int = 16  # Per-head width, 0 derives d_model // heads
    d_ff: int = 128
    n_layers: int = 2  # Ax units per stream
    dropout: float = 0.1
    ln_eps: float = 1e-5

    # Fusion
    window: Optional[int] = 4  # Relative window r, None = unlimited
    variant: Variant = Variant.RELMASK

    # Output
    vocab_size: int = 10  # Gloss count, blank excluded

    @classmethod
    def toy(cls) -> "SanConfig":
        """Desk-scale defaults."""
        return cls()

    @classmethod
    def large(cls) -> "SanConfig":
        """Full-width model: d_k=128 per head, 10 heads, 2 layers, d_ff=2048, dropout 0.3."""
        return cls(d_model=128, heads=10, d_k=128, d_ff=2048, n_layers=2, dropout=0.3)

    @property
    def head_dim(self) -> int:
        return self.d_k if self.d_k > 0 else self.d_model // self.heads

    @property
    def num_labels(self) -> int:
        """Size of the extended vocabulary (glosses plus blank)."""
        return self.vocab_size + 1

    def validate(self) -> None:
        if self.d_in < 1 or self.d_in_hand < 1:
            raise ConfigError("model.d_in and model.d_in_hand must be >= 1")
        if self.d_model < 2 or self.d_model % 2 != 0:
            raise ConfigError(f"model.d_model must be even and >= 2, got {self.d_model}")
        if self.heads < 1:
            raise ConfigError(f"model.heads must be >= 1, got {self.heads}")
        if self.d_k < 0:
            raise ConfigError(f"model.d_k must be >= 0, got {self.d_k}")
        if self.d_k == 0 and self.d_model % self.heads != 0:
            raise ConfigError("model.d_model must be divisible by model.heads when d_k is derived")
        if self.d_ff < self.d_model:
            raise ConfigError(f"model.d_ff ({self.d_ff}) must be >= model.d_model ({self.d_model})")
        if self.n_layers < 0:
            raise ConfigError("model.n_layers must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"model.dropout must be in [0, 1), got {self.dropout}")
        if self.window is not None and self.window < 1:
            raise ConfigError(f"model.window must be >= 1 or unlimited, got {self.window}")
        if self.vocab_size < 1:
            raise ConfigError("model.vocab_size must be >= 1")
        if self.ln_eps <= 0:
            raise ConfigError("model.ln_eps must be positive")


@dataclass
class GeneratorConfig:
    """Synthetic two-stream data settings."""
    vocab_size: int = 10
    samples: int = 200
    min_glosses: int = 2  # Glosses per sample
    max_glosses: int = 5
    min_frames_per_gloss: int = 2
    max_frames_per_gloss: int = 4
    sigma: float = 0.3  # Frame noise
    rho: float = 0.7  # Share of class signal placed in the hand stream
    drift: float = 0.5  # Step size of the shared body-context random walk
    d_in: int = 16
    d_in_hand: int = 16
    max_frames: int = 0  # Uniform-stride subsampling cap, 0 = off
    center: bool = False  # Subtract each stream's mean frame over the split
    template_seed: int = 1234  # Gloss templates, shared across splits
    seed: int = 0  # Sample draws
    split: str = "train"

    def validate(self) -> None:
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError(f"data.rho must be in [0, 1], got {self.rho}")
        if self.sigma < 0 or self.drift < 0:
            raise ConfigError("data.sigma and data.drift must be >= 0")
        if self.vocab_size < 1 or self.samples < 0:
            raise ConfigError("data.vocab_size must be >= 1 and data.samples >= 0")
        if not 1 <= self.min_glosses <= self.max_glosses:
            raise ConfigError("data.min_glosses..max_glosses must be a non-empty range starting at >= 1")
        if not 1 <= self.min_frames_per_gloss <= self.max_frames_per_gloss:
            raise ConfigError("data.min_frames_per_gloss..max_frames_per_gloss must be a non-empty range")
        if self.vocab_size == 1 and self.max_glosses > 1:
            raise ConfigError("a single-gloss vocabulary cannot form sequences without repeats")
        if self.d_in < 1 or self.d_in_hand < 1:
            raise ConfigError("data.d_in and data.d_in_hand must be >= 1")
        if self.max_frames < 0:
            raise ConfigError("data.max_frames must be >= 0")
        if self.split not in ("train", "dev", "test"):
            raise ConfigError(f"data.split must be train, dev or test, got {self.split!r}")


@dataclass
class OptimizerConfig:
    """Adam and gradient clipping settings."""
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 1.0

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError("optim.lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("optim.beta1 and optim.beta2 must be in [0, 1)")
        if self.eps <= 0 or self.clip <= 0:
            raise ConfigError("optim.eps and optim.clip must be positive")


@dataclass
class TrainConfig:
    """Training loop settings."""
    epochs: int = 100
    batch_size: int = 2
    seed: int = 0
    beam_width: int = 10
    patience: int = 5  # Epochs of stalled perplexity before stopping
    tolerance: float = 1e-4  # Minimum perplexity improvement that resets patience
    augment_shift: float = 0.0  # Std of the per-sample feature offset, 0 = off
    eval_workers: int = 1

    def validate(self) -> None:
        if self.epochs < 0:
            raise ConfigError("train.epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if self.beam_width < 1:
            raise ConfigError("train.beam_width must be >= 1")
        if self.patience < 1 or self.tolerance < 0:
            raise ConfigError("train.patience must be >= 1 and train.tolerance >= 0")
        if self.augment_shift < 0:
            raise ConfigError("train.augment_shift must be >= 0")
        if self.eval_workers < 1:
            raise ConfigError("train.eval_workers must be >= 1")


SECTIONS: Dict[str, Type] = {
    "model": SanConfig,
    "data": GeneratorConfig,
    "optim": OptimizerConfig,
    "train": TrainConfig,
}

PRESETS = {
    "toy": SanConfig.toy,
    "large": SanConfig.large,
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}
_UNLIMITED = {"unlimited", "none"}


def parse_key_values(text: str, source: str = "<text>") -> List[Tuple[str, str, int]]:
    """Split flat config text into (key, raw value, line number) triples.

    Blank lines and ``#`` comments are skipped.
    """
    items = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key")
        items.append((key, value, lineno))
    return items


def parse_value(raw: str, annotation: Any, key: str) -> Any:
    """Convert raw text into the annotated field type."""
    origin = typing.get_origin(annotation)
    if origin is typing.Union:
        inner = [a for a in typing.get_args(annotation) if a is not type(None)][0]
        if raw.lower() in _UNLIMITED:
            return None
        return parse_value(raw, inner, key)
    try:
        if annotation is bool:
            lowered = raw.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(raw)
        if annotation is int:
            return int(raw)
        if annotation is float:
            return float(raw)
        if isinstance(annotation, type) and issubclass(annotation, Enum):
            return annotation(raw)
        return raw
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None


def format_value(value: Any) -> str:
    """Render a field value so that parse_value reads it back unchanged."""
    if value is None:
        return "unlimited"
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_to_lines(prefix: str, record: Any) -> Iterator[str]:
    """Yield ``prefix.field = value`` lines for a config dataclass."""
    for f in fields(record):
        yield f"{prefix}.{f.name} = {format_value(getattr(record, f.name))}"


def set_field(record: Any, name: str, raw: str, key: str) -> None:
    """Parse raw text and assign it to a dataclass field."""
    hints = typing.get_type_hints(type(record))
    if name not in hints:
        raise ConfigError(f"unknown config key: {key}")
    setattr(record, name, parse_value(raw, hints[name], key))


def record_from_items(cls: Type, prefix: str, items: Dict[str, str], base: Any = None) -> Any:
    """Build a config dataclass from ``prefix.field`` entries, ignoring other prefixes."""
    record = dataclasses.replace(base) if base is not None else cls()
    for key, raw in items.items():
        section, _, name = key.partition(".")
        if section == prefix:
            set_field(record, name, raw, key)
    return record


class Config:
    """All configuration sections with file persistence."""

    def __init__(self, config_path: Optional[Path] = None):
        self.config_path = Path(config_path) if config_path is not None else None
        self.model = SanConfig()
        self.data = GeneratorConfig()
        self.optim = OptimizerConfig()
        self.train = TrainConfig()
        if self.config_path is not None:
            self.load()

    def sections(self) -> Dict[str, Any]:
        return {"model": self.model, "data": self.data, "optim": self.optim, "train": self.train}

    def load(self, path: Optional[Path] = None) -> None:
        """Load configuration from a ``key = value`` file."""
        path = Path(path) if path is not None else self.config_path
        if path is None:
            raise ConfigError("no config path given")
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"failed to read config {path}: {e}") from e
        self.loads(text, source=str(path))
        logger.debug("Loaded config from %s", path)

    def loads(self, text: str, source: str = "<text>") -> None:
        """Apply config text on top of the current values."""
        items = parse_key_values(text, source)

        # A preset replaces the model defaults before individual keys apply
        for key, value, lineno in items:
            if key == "preset":
                if value not in PRESETS:
                    raise ConfigError(f"{source}:{lineno}: unknown preset {value!r}")
                self.model = PRESETS[value]()

        for key, value, lineno in items:
            if key == "preset":
                continue
            section, _, name = key.partition(".")
            record = self.sections().get(section)
            if record is None or not name:
                raise ConfigError(f"{source}:{lineno}: unknown config key: {key}")
            set_field(record, name, value, key)
        self.validate()

    def dumps(self) -> str:
        lines = []
        for prefix, record in self.sections().items():
            lines.extend(record_to_lines(prefix, record))
            lines.append("")
        return "\n".join(lines)

    def save(self, path: Optional[Path] = None) -> None:
        """Save configuration to file."""
        path = Path(path) if path is not None else self.config_path
        if path is None:
            raise ConfigError("no config path given")
        path.write_text(self.dumps(), encoding="utf-8")

    def reset(self) -> None:
        """Reset every section to defaults."""
        self.model = SanConfig()
        self.data = GeneratorConfig()
        self.optim = OptimizerConfig()
        self.train = TrainConfig()

    def validate(self) -> None:
        for record in self.sections().values():
            record.validate()

    def get(self, key: str, default=None):
        """Get a configuration value by its dotted key."""
        section, _, name = key.partition(".")
        record = self.sections().get(section)
        return getattr(record, name, default) if record is not None else default

    def set(self, key: str, value: Any) -> None:
        """Set a configuration value by its dotted key; strings are parsed."""
        section, _, name = key.partition(".")
        record = self.sections().get(section)
        if record is None or not hasattr(record, name):
            raise ConfigError(f"unknown config key: {key}")
        if isinstance(value, str):
            set_field(record, name, value, key)
        else:
            setattr(record, name, value)

    def as_dict(self) -> Dict[str, Dict[str, Any]]:
        return {prefix: asdict(record) for prefix, record in self.sections().items()}
