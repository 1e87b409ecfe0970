"""Window-constrained 2D-3D matching "in the local grid" of an image."""

from collections import defaultdict
from typing import Dict, List, Tuple

import numpy as np

from surfelreloc.descriptors.binary import (
    DEFAULT_MAX_DISTANCE,
    DEFAULT_RATIO,
    Match,
    hamming_matrix,
    ratio_select,
)

DEFAULT_WINDOW = 15.0
DEFAULT_GRID_CELL = 32.0
OCTAVE_SCALE = 1.2


class KeypointGrid:
    """Buckets keypoint indices into square cells for window lookups."""

    def __init__(self, uv: np.ndarray, cell: float = DEFAULT_GRID_CELL):
        if not cell > 0:
            raise ValueError(f"Grid cell must be positive, got {cell}")
        self.cell = float(cell)
        self.uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
        self._cells: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for i, (u, v) in enumerate(self.uv):
            self._cells[(int(np.floor(u / self.cell)), int(np.floor(v / self.cell)))].append(i)

    def within(self, u: float, v: float, radius: float) -> np.ndarray:
        """Keypoints whose cell overlaps the square window ``[u±radius] x [v±radius]``."""
        c0, c1 = int(np.floor((u - radius) / self.cell)), int(np.floor((u + radius) / self.cell))
        r0, r1 = int(np.floor((v - radius) / self.cell)), int(np.floor((v + radius) / self.cell))
        found: List[int] = []
        for cx in range(c0, c1 + 1):
            for cy in range(r0, r1 + 1):
                found.extend(self._cells.get((cx, cy), ()))
        return np.asarray(sorted(found), dtype=np.int64)


def local_grid_match(
    projected_uv: np.ndarray,
    point_descriptors: np.ndarray,
    keypoint_uv: np.ndarray,
    keypoint_octaves: np.ndarray,
    keypoint_descriptors: np.ndarray,
    window: float = DEFAULT_WINDOW,
    grid_cell: float = DEFAULT_GRID_CELL,
    ratio: float = DEFAULT_RATIO,
    max_distance: float = DEFAULT_MAX_DISTANCE,
) -> List[Match]:
    """Match projected map points to keypoints inside a per-keypoint search window.

    A keypoint is a candidate for a projected point when both pixel offsets are within
    ``window * 1.2**octave`` of the keypoint. The ratio test runs over the candidates only
    and each keypoint is matched at most once. ``Match.query`` indexes the projected points,
    ``Match.candidate`` the keypoints.
    """
    projected_uv = np.asarray(projected_uv, dtype=np.float64).reshape(-1, 2)
    keypoint_uv = np.asarray(keypoint_uv, dtype=np.float64).reshape(-1, 2)
    if projected_uv.shape[0] == 0 or keypoint_uv.shape[0] == 0:
        return []
    half = window * np.power(OCTAVE_SCALE, np.asarray(keypoint_octaves, dtype=np.float64))
    reach = float(half.max())
    grid = KeypointGrid(keypoint_uv, grid_cell)

    rows, cols = [], []
    for i, (u, v) in enumerate(projected_uv):
        cand = grid.within(u, v, reach)
        if cand.size == 0:
            continue
        off = np.abs(keypoint_uv[cand] - (u, v))
        cand = cand[(off[:, 0] <= half[cand]) & (off[:, 1] <= half[cand])]
        rows.extend([i] * cand.size)
        cols.extend(cand.tolist())
    if not rows:
        return []

    rows_a = np.asarray(rows, dtype=np.int64)
    cols_a = np.asarray(cols, dtype=np.int64)
    used_points = np.unique(rows_a)
    used_kps = np.unique(cols_a)
    D = hamming_matrix(point_descriptors[used_points], keypoint_descriptors[used_kps])
    allowed = np.zeros(D.shape, dtype=bool)
    allowed[np.searchsorted(used_points, rows_a), np.searchsorted(used_kps, cols_a)] = True
    local = ratio_select(D, allowed, ratio, max_distance)
    return [Match(int(used_points[m.query]), int(used_kps[m.candidate]), m.distance) for m in local]
