"""Surfel maps and the software renderer producing global surfel index maps."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple, Tuple, Union

import numpy as np

from surfelreloc.dataflows.surfel_io import (
    SurfelMapFormatError,
    read_srfl,
    read_surfel_text,
    validate_surfels,
    write_srfl,
)
from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose

logger = logging.getLogger(__name__)

EMPTY = -1
Z_NEAR = 0.05
# bound on (pixel, surfel) coverage pairs evaluated at once
_SPLAT_BATCH = 2_000_000


class PlaneCoeff(NamedTuple):
    n: np.ndarray
    d: float


@dataclass(frozen=True)
class Surfel:
    id: int
    center: np.ndarray
    normal: np.ndarray
    radius: float

    def plane(self) -> PlaneCoeff:
        return plane_coeff(self)


def plane_coeff(s: Surfel) -> PlaneCoeff:
    return PlaneCoeff(np.asarray(s.normal, dtype=np.float64), float(-np.dot(s.normal, s.center)))


class SurfelMap:
    """Immutable set of oriented disks with dense ids ``0..N-1``."""

    def __init__(self, centers: np.ndarray, normals: np.ndarray, radii: np.ndarray):
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
        normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        radii = np.asarray(radii, dtype=np.float64).reshape(-1)
        if not (centers.shape[0] == normals.shape[0] == radii.shape[0]):
            raise SurfelMapFormatError("Surfel centers, normals and radii differ in length")
        centers, normals, radii = validate_surfels(centers, normals, radii)
        for arr in (centers, normals, radii):
            arr.flags.writeable = False
        self.centers = centers
        self.normals = normals
        self.radii = radii
        d = -np.einsum("ij,ij->i", normals, centers)
        d.flags.writeable = False
        self.plane_offsets = d

    def __len__(self) -> int:
        return self.centers.shape[0]

    def __getitem__(self, surfel_id: int) -> Surfel:
        i = int(surfel_id)
        return Surfel(i, self.centers[i], self.normals[i], float(self.radii[i]))

    def plane(self, surfel_id: int) -> PlaneCoeff:
        i = int(surfel_id)
        return PlaneCoeff(self.normals[i], float(self.plane_offsets[i]))

    def save(self, path: Union[str, Path]) -> None:
        write_srfl(path, self.centers, self.normals, self.radii)


def load_surfel_map(path: Union[str, Path]) -> SurfelMap:
    """Load an ``SRFL`` binary map, or a text map when the file ends in ``.txt``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Surfel map not found: {path}")
    arrays = read_surfel_text(path) if path.suffix == ".txt" else read_srfl(path)
    surfel_map = SurfelMap(*arrays)
    logger.info("Loaded %d surfels from %s", len(surfel_map), path)
    return surfel_map


@dataclass(frozen=True)
class SurfelIndexMap:
    """Per-pixel winning surfel id (``EMPTY`` where nothing was drawn) and its depth (0 there)."""

    ids: np.ndarray
    depth: np.ndarray

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    def rendered_count(self) -> int:
        return int(np.count_nonzero(self.ids != EMPTY))


class SplatParams(NamedTuple):
    ids: np.ndarray
    u: np.ndarray
    v: np.ndarray
    radius_px: np.ndarray
    z: np.ndarray


def splat_params(surfel_map: SurfelMap, pose: SE3Pose, cam: PinholeCamera) -> SplatParams:
    """Screen-space disks of the surfels that survive near-plane and back-face culling."""
    Xc = pose.inverse_transform(surfel_map.centers)
    z = Xc[:, 2]
    view = surfel_map.centers - pose.translation
    front = np.einsum("ij,ij->i", surfel_map.normals, view) < 0.0
    keep = np.flatnonzero((z > Z_NEAR) & front)
    Xk = Xc[keep]
    zk = z[keep]
    u = cam.fx * Xk[:, 0] / zk + cam.cx
    v = cam.fy * Xk[:, 1] / zk + cam.cy
    r = np.maximum(1.0, cam.fx * surfel_map.radii[keep] / zk)
    return SplatParams(keep.astype(np.int64), u, v, r, zk)


def render_index_map(surfel_map: SurfelMap, pose: SE3Pose, cam: PinholeCamera) -> SurfelIndexMap:
    """Z-buffered disk splatting; per pixel the smallest (depth, surfel id) wins."""
    W, H = cam.width, cam.height
    best_z = np.full(W * H, np.inf)
    best_id = np.full(W * H, EMPTY, dtype=np.int64)

    sp = splat_params(surfel_map, pose, cam)
    x0 = np.maximum(np.ceil(sp.u - sp.radius_px), 0).astype(np.int64)
    x1 = np.minimum(np.floor(sp.u + sp.radius_px), W - 1).astype(np.int64)
    y0 = np.maximum(np.ceil(sp.v - sp.radius_px), 0).astype(np.int64)
    y1 = np.minimum(np.floor(sp.v + sp.radius_px), H - 1).astype(np.int64)
    bw = np.maximum(x1 - x0 + 1, 0)
    bh = np.maximum(y1 - y0 + 1, 0)
    area = bw * bh
    visible = np.flatnonzero(area > 0)

    start = 0
    while start < visible.size:
        stop = start + 1
        budget = area[visible[start]]
        while stop < visible.size and budget + area[visible[stop]] <= _SPLAT_BATCH:
            budget += area[visible[stop]]
            stop += 1
        _splat_batch(visible[start:stop], sp, x0, y0, bw, area, W, best_z, best_id)
        start = stop

    ids = best_id.reshape(H, W)
    depth = np.where(ids != EMPTY, best_z.reshape(H, W), 0.0)
    return SurfelIndexMap(ids, depth)


def _splat_batch(sel, sp: SplatParams, x0, y0, bw, area, W, best_z, best_id) -> None:
    counts = area[sel]
    owner = np.repeat(sel, counts)
    offsets = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    px = x0[owner] + offsets % bw[owner]
    py = y0[owner] + offsets // bw[owner]
    inside = (px - sp.u[owner]) ** 2 + (py - sp.v[owner]) ** 2 <= sp.radius_px[owner] ** 2
    owner, px, py = owner[inside], px[inside], py[inside]
    if owner.size == 0:
        return
    pixel = py * W + px
    z = sp.z[owner]
    sid = sp.ids[owner]
    order = np.lexsort((sid, z, pixel))
    pixel, z, sid = pixel[order], z[order], sid[order]
    first = np.concatenate(([True], pixel[1:] != pixel[:-1]))
    pixel, z, sid = pixel[first], z[first], sid[first]
    better = (z < best_z[pixel]) | ((z == best_z[pixel]) & (sid < best_id[pixel]))
    best_z[pixel[better]] = z[better]
    best_id[pixel[better]] = sid[better]


@dataclass(frozen=True)
class KeypointAssociation:
    """Per-keypoint surfel id (``EMPTY`` for none) and neighboring surfel sets."""

    surfel_ids: np.ndarray
    neighbors: Tuple[frozenset, ...]
    skipped: int

    def associated(self) -> np.ndarray:
        return np.flatnonzero(self.surfel_ids != EMPTY)


def associate_keypoints(index_map: SurfelIndexMap, uv: np.ndarray, sizes: np.ndarray) -> KeypointAssociation:
    """Look up each keypoint's surfel at its rounded pixel and collect the distinct
    surfels within a circle of radius ``size`` around it (minus the associated one).

    Keypoints whose rounded pixel falls outside the image are skipped and counted.
    """
    H, W = index_map.ids.shape
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    n = uv.shape[0]
    surfel_ids = np.full(n, EMPTY, dtype=np.int64)
    neighbors: List[frozenset] = [frozenset()] * n
    skipped = 0
    ids = index_map.ids
    for i in range(n):
        u, v = uv[i]
        col, row = int(np.floor(u + 0.5)), int(np.floor(v + 0.5))
        if not (0 <= col < W and 0 <= row < H):
            skipped += 1
            continue
        assoc = int(ids[row, col])
        surfel_ids[i] = assoc
        r = float(sizes[i])
        xs = np.arange(max(int(np.ceil(u - r)), 0), min(int(np.floor(u + r)), W - 1) + 1)
        ys = np.arange(max(int(np.ceil(v - r)), 0), min(int(np.floor(v + r)), H - 1) + 1)
        if xs.size == 0 or ys.size == 0:
            continue
        gx, gy = np.meshgrid(xs, ys)
        disk = (gx - u) ** 2 + (gy - v) ** 2 <= r * r
        found = np.unique(ids[gy[disk], gx[disk]])
        neighbors[i] = frozenset(int(s) for s in found if s != EMPTY and s != assoc)
    if skipped:
        logger.warning("Skipped %d keypoints outside the %dx%d image", skipped, W, H)
    return KeypointAssociation(surfel_ids, tuple(neighbors), skipped)
