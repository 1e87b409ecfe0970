"""Little-endian binary containers: a magic/version header followed by tagged sections.

Each section is ``tag (4 ASCII bytes) | payload length (u64) | CRC32 (u32) | payload``.
Readers check every length and checksum before any object is built.
"""

import struct
import zlib
from typing import Dict, Iterable, Tuple, Type

import numpy as np

_HEADER = struct.Struct("<4sI")
_SECTION = struct.Struct("<4sQI")


class ByteWriter:
    def __init__(self):
        self._parts = []

    def pack(self, fmt: str, *values) -> None:
        self._parts.append(struct.pack("<" + fmt, *values))

    def array(self, values: np.ndarray, dtype: str) -> None:
        self._parts.append(np.ascontiguousarray(values, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())

    def raw(self, data: bytes) -> None:
        self._parts.append(bytes(data))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class ByteReader:
    def __init__(self, data: bytes, error: Type[Exception] = ValueError, context: str = "payload"):
        self._data = memoryview(data)
        self._pos = 0
        self._error = error
        self._context = context

    def _take(self, size: int) -> memoryview:
        if size < 0 or self._pos + size > len(self._data):
            raise self._error(f"Truncated {self._context} at byte {self._pos} (need {size} more)")
        chunk = self._data[self._pos : self._pos + size]
        self._pos += size
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        s = struct.Struct("<" + fmt)
        return s.unpack(self._take(s.size))

    def scalar(self, fmt: str):
        return self.unpack(fmt)[0]

    def array(self, count: int, dtype: str, shape: Tuple[int, ...] = None) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        out = np.frombuffer(self._take(int(count) * dt.itemsize), dtype=dt).astype(dt.newbyteorder("="))
        return out.reshape(shape) if shape is not None else out

    def raw(self, size: int) -> bytes:
        return bytes(self._take(size))

    def at_end(self) -> bool:
        return self._pos == len(self._data)

    def expect_end(self) -> None:
        if not self.at_end():
            raise self._error(f"{len(self._data) - self._pos} trailing bytes in {self._context}")


def pack_sections(magic: bytes, version: int, sections: Iterable[Tuple[bytes, bytes]]) -> bytes:
    out = [_HEADER.pack(magic, version)]
    for tag, payload in sections:
        out.append(_SECTION.pack(tag, len(payload), zlib.crc32(payload) & 0xFFFFFFFF))
        out.append(payload)
    return b"".join(out)


def unpack_sections(
    data: bytes, magic: bytes, version: int, error: Type[Exception] = ValueError
) -> Dict[bytes, bytes]:
    """Validate the container and return its sections by tag."""
    if len(data) < _HEADER.size:
        raise error("File too short for header")
    found_magic, found_version = _HEADER.unpack_from(data, 0)
    if found_magic != magic:
        raise error(f"Bad magic {found_magic!r}, expected {magic!r}")
    if found_version != version:
        raise error(f"Unsupported version {found_version}, expected {version}")

    sections: Dict[bytes, bytes] = {}
    pos = _HEADER.size
    while pos < len(data):
        if pos + _SECTION.size > len(data):
            raise error(f"Truncated section header at byte {pos}")
        tag, length, crc = _SECTION.unpack_from(data, pos)
        pos += _SECTION.size
        if pos + length > len(data):
            raise error(f"Section {tag!r} truncated: declared {length} bytes, {len(data) - pos} left")
        payload = bytes(data[pos : pos + length])
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise error(f"Checksum mismatch in section {tag!r}")
        if tag in sections:
            raise error(f"Duplicate section {tag!r}")
        sections[tag] = payload
        pos += length
    return sections


def require_sections(sections: Dict[bytes, bytes], tags: Iterable[bytes], error: Type[Exception]) -> None:
    missing = [t.decode("ascii", "replace") for t in tags if t not in sections]
    if missing:
        raise error(f"Missing sections: {', '.join(missing)}")
