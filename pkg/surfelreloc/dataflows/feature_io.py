"""``FEAT`` observation files: per-frame timestamp, keypoints and binary descriptors."""

import json
from pathlib import Path
from typing import List, Sequence, Union

from surfelreloc.descriptors.features import DESCRIPTOR_BYTES, FrameFeatures

from .binary_io import ByteReader, ByteWriter, pack_sections, require_sections, unpack_sections
from .utils import write_bytes_atomic

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1


class FeatureFileError(ValueError):
    """Raised for unreadable observation files."""


def encode_features(frames: Sequence[FrameFeatures], meta: dict = None) -> bytes:
    w = ByteWriter()
    w.pack("Q", len(frames))
    for f in frames:
        w.pack("dI", float(f.timestamp), len(f))
        w.array(f.uv, "f8")
        w.array(f.sizes, "f8")
        w.array(f.octaves, "i4")
        w.array(f.descriptors, "u1")
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    return pack_sections(FEAT_MAGIC, FEAT_VERSION, [(b"META", meta_bytes), (b"FRMS", w.getvalue())])


def decode_features(data: bytes) -> List[FrameFeatures]:
    sections = unpack_sections(data, FEAT_MAGIC, FEAT_VERSION, FeatureFileError)
    require_sections(sections, [b"FRMS"], FeatureFileError)
    r = ByteReader(sections[b"FRMS"], FeatureFileError, "FEAT frames")
    frames = []
    for _ in range(r.scalar("Q")):
        timestamp, n = r.unpack("dI")
        uv = r.array(2 * n, "f8", (n, 2))
        sizes = r.array(n, "f8")
        octaves = r.array(n, "i4")
        descriptors = r.array(n * DESCRIPTOR_BYTES, "u1", (n, DESCRIPTOR_BYTES))
        try:
            frames.append(FrameFeatures(uv, sizes, octaves, descriptors, timestamp))
        except ValueError as exc:
            raise FeatureFileError(f"Frame {len(frames)}: {exc}") from exc
    r.expect_end()
    return frames


def read_feature_meta(path: Union[str, Path]) -> dict:
    sections = unpack_sections(Path(path).read_bytes(), FEAT_MAGIC, FEAT_VERSION, FeatureFileError)
    return json.loads(sections.get(b"META", b"{}"))


def save_features(path: Union[str, Path], frames: Sequence[FrameFeatures], meta: dict = None) -> None:
    write_bytes_atomic(path, encode_features(frames, meta))


def load_features(path: Union[str, Path]) -> List[FrameFeatures]:
    path = Path(path)
    if not path.exists():
        raise FeatureFileError(f"Observation file not found: {path}")
    return decode_features(path.read_bytes())
