"""Hamming distances and Lowe ratio matching for 256-bit binary descriptors."""

from __future__ import annotations

from typing import List, NamedTuple, Optional

import numpy as np

from .features import DESCRIPTOR_BYTES, as_descriptor_array

DEFAULT_RATIO = 0.8
DEFAULT_MAX_DISTANCE = 50

_CHUNK_ROWS = 2048


class Match(NamedTuple):
    query: int
    candidate: int
    distance: int


def _as_words(descriptors: np.ndarray) -> np.ndarray:
    return as_descriptor_array(descriptors).view(np.uint64)


def hamming_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Hamming distances, shape (len(a), len(b)), int32."""
    wa, wb = _as_words(a), _as_words(b)
    out = np.empty((wa.shape[0], wb.shape[0]), dtype=np.int32)
    if out.size == 0:
        return out
    for start in range(0, wa.shape[0], _CHUNK_ROWS):
        block = wa[start : start + _CHUNK_ROWS]
        xor = block[:, None, :] ^ wb[None, :, :]
        out[start : start + block.shape[0]] = np.bitwise_count(xor).sum(axis=2, dtype=np.int32)
    return out


def hamming(a: np.ndarray, b: np.ndarray) -> int:
    return int(hamming_matrix(a, b)[0, 0])


def unpack_bits(descriptors: np.ndarray) -> np.ndarray:
    """(N, 256) array of 0/1 bits."""
    return np.unpackbits(as_descriptor_array(descriptors), axis=1)


def flip_bits(descriptor: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``descriptor`` with ``count`` distinct random bits inverted."""
    out = np.array(descriptor, dtype=np.uint8).reshape(DESCRIPTOR_BYTES)
    if count <= 0:
        return out
    positions = rng.choice(DESCRIPTOR_BYTES * 8, size=min(count, DESCRIPTOR_BYTES * 8), replace=False)
    np.bitwise_xor.at(out, positions // 8, (1 << (7 - positions % 8)).astype(np.uint8))
    return out


def random_descriptors(count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 256, size=(count, DESCRIPTOR_BYTES), dtype=np.uint8)


def ratio_select(
    distances: np.ndarray,
    allowed: Optional[np.ndarray] = None,
    ratio: float = DEFAULT_RATIO,
    max_distance: float = DEFAULT_MAX_DISTANCE,
) -> List[Match]:
    """Ratio test over a distance matrix with an optional per-pair admissibility mask.

    Each row keeps its nearest admissible column when ``d1 < ratio * d2`` and
    ``d1 <= max_distance``; a row with a single admissible column has ``d2 = inf``.
    The result is injective in the columns: a column claimed by several rows keeps the
    smallest distance, ties going to the smaller row index.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    n_rows, n_cols = distances.shape
    if n_rows == 0 or n_cols == 0:
        return []
    d = distances.astype(np.float64)
    if allowed is not None:
        d = np.where(allowed, d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")
    rows = np.arange(n_rows)
    best = order[:, 0]
    d1 = d[rows, best]
    d2 = d[rows, order[:, 1]] if n_cols > 1 else np.full(n_rows, np.inf)
    accept = np.isfinite(d1) & (d1 < ratio * d2) & (d1 <= max_distance)

    claimed: dict[int, Match] = {}
    for r in np.flatnonzero(accept):
        m = Match(int(r), int(best[r]), int(d1[r]))
        prev = claimed.get(m.candidate)
        if prev is None or m.distance < prev.distance:
            claimed[m.candidate] = m
    return sorted(claimed.values())


def match_ratio(
    query: np.ndarray,
    candidates: np.ndarray,
    ratio: float = DEFAULT_RATIO,
    max_distance: float = DEFAULT_MAX_DISTANCE,
) -> List[Match]:
    """Nearest-neighbour matching with Lowe's ratio test, as an injective partial map."""
    return ratio_select(hamming_matrix(query, candidates), None, ratio, max_distance)
