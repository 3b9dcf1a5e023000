"""Minimal big-endian binary reader/writer for canonical record bytes."""
from __future__ import annotations

import struct

from .errors import ParseError


class Writer:
    def __init__(self):
        self._parts: list[bytes] = []

    def u8(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">B", v))
        return self

    def u32(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">I", v))
        return self

    def u64(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">Q", v))
        return self

    def raw(self, b: bytes, size: int | None = None) -> "Writer":
        if size is not None and len(b) != size:
            raise ValueError(f"expected {size} bytes, got {len(b)}")
        self._parts.append(bytes(b))
        return self

    def var(self, b: bytes) -> "Writer":
        return self.u32(len(b)).raw(b)

    def text(self, s: str) -> "Writer":
        return self.var(s.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes, what: str = "record"):
        self.data = bytes(data)
        self.pos = 0
        self.what = what

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ParseError(f"{self.what}: truncated, wanted {n} bytes", self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def var(self) -> bytes:
        return self._take(self.u32())

    def text(self) -> str:
        start = self.pos
        b = self.var()
        try:
            return b.decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError(f"{self.what}: invalid UTF-8", start) from None

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos

    def expect_end(self) -> None:
        if self.remaining:
            raise ParseError(f"{self.what}: {self.remaining} trailing bytes", self.pos)
