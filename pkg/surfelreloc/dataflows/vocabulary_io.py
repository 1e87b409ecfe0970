"""``VOCB`` vocabulary files: magic, version u32, vocab_size u32, projection seed u64, raw words."""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from surfelreloc.descriptors.features import DESCRIPTOR_BYTES
from surfelreloc.descriptors.vocabulary import Vocabulary, VocabularyError

from .utils import write_bytes_atomic

VOCB_MAGIC = b"VOCB"
VOCB_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


def encode_vocabulary(vocabulary: Vocabulary) -> bytes:
    header = _HEADER.pack(VOCB_MAGIC, VOCB_VERSION, vocabulary.size, vocabulary.projection_seed)
    return header + vocabulary.words.tobytes()


def decode_vocabulary(data: bytes) -> Vocabulary:
    if len(data) < _HEADER.size:
        raise VocabularyError("File too short for VOCB header")
    magic, version, size, seed = _HEADER.unpack_from(data, 0)
    if magic != VOCB_MAGIC:
        raise VocabularyError(f"Bad magic {magic!r}, expected {VOCB_MAGIC!r}")
    if version != VOCB_VERSION:
        raise VocabularyError(f"Unsupported VOCB version {version}")
    expected = _HEADER.size + size * DESCRIPTOR_BYTES
    if len(data) != expected:
        raise VocabularyError(f"VOCB payload is {len(data)} bytes, expected {expected}")
    words = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size).reshape(size, DESCRIPTOR_BYTES)
    return Vocabulary(words.copy(), projection_seed=int(seed))


def save_vocabulary(path: Union[str, Path], vocabulary: Vocabulary) -> None:
    write_bytes_atomic(path, encode_vocabulary(vocabulary))


def load_vocabulary(path: Union[str, Path]) -> Vocabulary:
    path = Path(path)
    if not path.exists():
        raise VocabularyError(f"Vocabulary file not found: {path}")
    return decode_vocabulary(path.read_bytes())
