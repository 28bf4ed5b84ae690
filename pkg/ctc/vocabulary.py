"""Gloss vocabulary with a reserved blank label."""
from typing import Iterable, List, Sequence

from utils.errors import ConfigError

BLANK_ID = 0
BLANK_TOKEN = "<blank>"


class GlossVocabulary:
    """Bidirectional map between label ids and gloss strings.

    Id 0 is the blank; gloss ``i`` of ``labels`` has id ``i + 1``.
    """

    blank_id = BLANK_ID

    def __init__(self, labels: Iterable[str]):
        self.labels: List[str] = list(labels)
        if BLANK_TOKEN in self.labels:
            raise ConfigError(f"{BLANK_TOKEN!r} is reserved and cannot be a gloss")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError("gloss labels must be unique")
        self._ids = {gloss: i + 1 for i, gloss in enumerate(self.labels)}

    @classmethod
    def synthetic(cls, size: int) -> "GlossVocabulary":
        """Vocabulary of ``size`` placeholder glosses ``G00``, ``G01``, ..."""
        width = max(2, len(str(size - 1)))
        return cls(f"G{i:0{width}d}" for i in range(size))

    def __len__(self) -> int:
        """Size of the extended vocabulary, blank included."""
        return len(self.labels) + 1

    @property
    def gloss_count(self) -> int:
        return len(self.labels)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GlossVocabulary) and self.labels == other.labels

    def __repr__(self) -> str:
        return f"GlossVocabulary({self.gloss_count} glosses)"

    def id_of(self, gloss: str) -> int:
        try:
            return self._ids[gloss]
        except KeyError:
            raise ConfigError(f"unknown gloss {gloss!r}") from None

    def gloss_of(self, label_id: int) -> str:
        if label_id == BLANK_ID:
            return BLANK_TOKEN
        if not 0 < label_id <= len(self.labels):
            raise ConfigError(f"label id {label_id} outside vocabulary of {len(self)}")
        return self.labels[label_id - 1]

    def encode(self, glosses: Sequence[str]) -> List[int]:
        return [self.id_of(g) for g in glosses]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.gloss_of(i) for i in ids]
