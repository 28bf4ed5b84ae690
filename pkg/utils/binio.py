"""Little-endian binary container helpers with offset-aware errors."""
import hashlib
import struct
from typing import List, Sequence, Tuple

import numpy as np

from .errors import FormatError

CHECKSUM_SIZE = 32  # sha256


class BinaryWriter:
    """Accumulates a container body; ``finish`` appends the checksum."""

    def __init__(self, magic: bytes):
        self._parts: List[bytes] = [magic]

    def u8(self, value: int) -> None:
        self._parts.append(struct.pack("<B", value))

    def u16(self, value: int) -> None:
        self._parts.append(struct.pack("<H", value))

    def u32(self, value: int) -> None:
        self._parts.append(struct.pack("<I", value))

    def text(self, value: str) -> None:
        """u32 byte length followed by UTF-8 bytes."""
        encoded = value.encode("utf-8")
        self.u32(len(encoded))
        self._parts.append(encoded)

    def strings(self, values: Sequence[str]) -> None:
        self.u32(len(values))
        for value in values:
            self.text(value)

    def floats(self, array: np.ndarray) -> None:
        self._parts.append(np.ascontiguousarray(array, dtype="<f8").tobytes())

    def ints(self, values: Sequence[int]) -> None:
        self._parts.append(np.asarray(values, dtype="<u4").tobytes())

    def finish(self) -> bytes:
        body = b"".join(self._parts)
        return body + hashlib.sha256(body).digest()


class BinaryReader:
    """Sequential reader over a checksummed container."""

    def __init__(self, data: bytes, magic: bytes, kind: str):
        self.kind = kind
        if len(data) < len(magic) + CHECKSUM_SIZE:
            raise FormatError(f"{kind} file truncated: {len(data)} bytes", offset=len(data))
        if data[: len(magic)] != magic:
            raise FormatError(f"not a {kind} file: bad magic {data[:len(magic)]!r}", offset=0)
        body, digest = data[:-CHECKSUM_SIZE], data[-CHECKSUM_SIZE:]
        if hashlib.sha256(body).digest() != digest:
            raise FormatError(f"{kind} checksum mismatch", offset=len(body))
        self._data = body
        self.offset = len(magic)

    def _take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if size < 0 or end > len(self._data):
            raise FormatError(f"{self.kind}: truncated while reading {what}", offset=self.offset)
        chunk = self._data[self.offset:end]
        self.offset = end
        return chunk

    def u8(self, what: str = "u8") -> int:
        return struct.unpack("<B", self._take(1, what))[0]

    def u16(self, what: str = "u16") -> int:
        return struct.unpack("<H", self._take(2, what))[0]

    def u32(self, what: str = "u32") -> int:
        return struct.unpack("<I", self._take(4, what))[0]

    def text(self, what: str = "text") -> str:
        start = self.offset
        raw = self._take(self.u32(what), what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"{self.kind}: {what} is not valid UTF-8", offset=start) from None

    def strings(self, what: str = "strings") -> List[str]:
        return [self.text(what) for _ in range(self.u32(what))]

    def floats(self, shape: Tuple[int, ...], what: str = "floats") -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self._take(count * 8, what)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)

    def ints(self, count: int, what: str = "ints") -> List[int]:
        raw = self._take(count * 4, what)
        return np.frombuffer(raw, dtype="<u4").astype(np.int64).tolist()

    def expect_end(self) -> None:
        if self.offset != len(self._data):
            raise FormatError(f"{self.kind}: {len(self._data) - self.offset} trailing bytes", offset=self.offset)
