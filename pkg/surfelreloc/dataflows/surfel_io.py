"""Surfel map files.

Binary ``SRFL`` layout (little endian): magic ``SRFL``, version u32, count u64, then per
surfel ``center 3xf64 | normal 3xf64 | radius f64``; the id is the record order.
The text import takes ``x y z nx ny nz r`` or ``id x y z nx ny nz r`` per line.
"""

import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .utils import write_bytes_atomic

SRFL_MAGIC = b"SRFL"
SRFL_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
SURFEL_DTYPE = np.dtype([("center", "<f8", (3,)), ("normal", "<f8", (3,)), ("radius", "<f8")])


class SurfelMapFormatError(ValueError):
    """Raised for unreadable or invalid surfel map files."""


SurfelArrays = Tuple[np.ndarray, np.ndarray, np.ndarray]


def validate_surfels(centers: np.ndarray, normals: np.ndarray, radii: np.ndarray, origin: str = "record") -> SurfelArrays:
    """Check surfel invariants and renormalize normals that drift from unit length."""
    if centers.shape[0] == 0:
        raise SurfelMapFormatError("Surfel map contains no surfels")
    finite = np.isfinite(centers).all(axis=1) & np.isfinite(normals).all(axis=1) & np.isfinite(radii)
    if not finite.all():
        raise SurfelMapFormatError(f"Non-finite values in {origin} {int(np.flatnonzero(~finite)[0])}")
    if not (radii > 0).all():
        raise SurfelMapFormatError(f"Non-positive radius in {origin} {int(np.flatnonzero(radii <= 0)[0])}")
    norms = np.linalg.norm(normals, axis=1)
    if not (norms > 1e-9).all():
        raise SurfelMapFormatError(f"Degenerate normal in {origin} {int(np.flatnonzero(norms <= 1e-9)[0])}")
    drift = np.abs(norms - 1.0) > 1e-12
    if drift.any():
        normals = normals.copy()
        normals[drift] /= norms[drift, None]
    return centers, normals, radii


def encode_srfl(centers: np.ndarray, normals: np.ndarray, radii: np.ndarray) -> bytes:
    records = np.zeros(centers.shape[0], dtype=SURFEL_DTYPE)
    records["center"] = centers
    records["normal"] = normals
    records["radius"] = radii
    return _HEADER.pack(SRFL_MAGIC, SRFL_VERSION, centers.shape[0]) + records.tobytes()


def decode_srfl(data: bytes) -> SurfelArrays:
    if len(data) < _HEADER.size:
        raise SurfelMapFormatError("File too short for SRFL header")
    magic, version, count = _HEADER.unpack_from(data, 0)
    if magic != SRFL_MAGIC:
        raise SurfelMapFormatError(f"Bad magic {magic!r}, expected {SRFL_MAGIC!r}")
    if version != SRFL_VERSION:
        raise SurfelMapFormatError(f"Unsupported SRFL version {version}")
    body = len(data) - _HEADER.size
    expected = count * SURFEL_DTYPE.itemsize
    if body < expected:
        raise SurfelMapFormatError(
            f"Truncated SRFL file: record {body // SURFEL_DTYPE.itemsize} of {count} is incomplete"
        )
    if body > expected:
        raise SurfelMapFormatError(f"{body - expected} trailing bytes after {count} SRFL records")
    records = np.frombuffer(data, dtype=SURFEL_DTYPE, count=count, offset=_HEADER.size)
    return validate_surfels(
        records["center"].astype(np.float64),
        records["normal"].astype(np.float64),
        records["radius"].astype(np.float64),
    )


def read_srfl(path: Union[str, Path]) -> SurfelArrays:
    return decode_srfl(Path(path).read_bytes())


def write_srfl(path: Union[str, Path], centers: np.ndarray, normals: np.ndarray, radii: np.ndarray) -> None:
    write_bytes_atomic(path, encode_srfl(centers, normals, radii))


def read_surfel_text(path: Union[str, Path]) -> SurfelArrays:
    rows, ids = [], []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) not in (7, 8):
                raise SurfelMapFormatError(f"{path}:{lineno}: expected 7 or 8 fields, got {len(fields)}")
            try:
                values = [float(v) for v in fields]
            except ValueError as exc:
                raise SurfelMapFormatError(f"{path}:{lineno}: {exc}") from exc
            if len(fields) == 8:
                if not values[0].is_integer():
                    raise SurfelMapFormatError(f"{path}:{lineno}: surfel id must be an integer")
                ids.append(int(values[0]))
                values = values[1:]
            rows.append(values)
    if ids and len(ids) != len(rows):
        raise SurfelMapFormatError(f"{path}: mixes records with and without ids")
    table = np.array(rows, dtype=np.float64).reshape(-1, 7)
    if ids:
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise SurfelMapFormatError(f"{path}: duplicate surfel id {dup}")
        if sorted(ids) != list(range(len(ids))):
            raise SurfelMapFormatError(f"{path}: surfel ids must be contiguous from 0")
        table = table[np.argsort(ids)]
    return validate_surfels(table[:, 0:3], table[:, 3:6], table[:, 6], origin="surfel")
