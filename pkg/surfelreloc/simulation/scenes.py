"""Planar synthetic worlds: tessellated surfels plus descriptor-carrying landmarks."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np

from surfelreloc.descriptors.binary import flip_bits, random_descriptors
from surfelreloc.mapping.surfel_map import SurfelMap

logger = logging.getLogger(__name__)

SCENE_KINDS = ("room", "corridor", "two_lane", "twin_rooms")
TWIN_GAP = 1.0  # m between the twin rooms


@dataclass
class SceneSpec:
    kind: str = "room"  # Options: room, corridor, two_lane, twin_rooms
    length: float = 4.0  # m along x
    width: float = 4.0  # m along y
    height: float = 3.0  # m along z
    surfel_radius: float = 0.1
    pitch_factor: float = 1.4  # surfel grid pitch in radii
    landmark_density: float = 5.0  # per m^2
    prototypes: int = 96
    prototype_flips: int = 48
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"Unsupported scene kind: {self.kind}")
        for name in ("length", "width", "height", "surfel_radius", "pitch_factor", "landmark_density"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.prototypes <= 0 or not 0 <= self.prototype_flips <= 256:
            raise ValueError("prototypes must be positive and prototype_flips within [0, 256]")

    @property
    def pitch(self) -> float:
        return self.pitch_factor * self.surfel_radius

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Plane:
    """Rectangle ``origin + a*axis_u + b*axis_v`` for ``a in [0, size_u]``, ``b in [0, size_v]``."""

    origin: Tuple[float, float, float]
    axis_u: Tuple[float, float, float]
    axis_v: Tuple[float, float, float]
    size_u: float
    size_v: float
    normal: Tuple[float, float, float]  # points into the free space
    room: int = 0

    @property
    def offset(self) -> float:
        return -float(np.dot(self.normal, self.origin))

    @property
    def area(self) -> float:
        return self.size_u * self.size_v

    def point(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)[..., None]
        b = np.asarray(b, dtype=np.float64)[..., None]
        return np.asarray(self.origin) + a * np.asarray(self.axis_u) + b * np.asarray(self.axis_v)


def _box_planes(x0: float, x1: float, y0: float, y1: float, h: float, room: int, closed: bool = True) -> List[Plane]:
    lx, ly = x1 - x0, y1 - y0
    planes = [
        Plane((x0, y0, 0.0), (1, 0, 0), (0, 1, 0), lx, ly, (0, 0, 1), room),  # floor
        Plane((x0, y0, 0.0), (1, 0, 0), (0, 0, 1), lx, h, (0, 1, 0), room),  # y = y0
        Plane((x0, y1, 0.0), (1, 0, 0), (0, 0, 1), lx, h, (0, -1, 0), room),  # y = y1
    ]
    if closed:
        planes += [
            Plane((x0, y0, h), (1, 0, 0), (0, 1, 0), lx, ly, (0, 0, -1), room),  # ceiling
            Plane((x0, y0, 0.0), (0, 1, 0), (0, 0, 1), ly, h, (1, 0, 0), room),  # x = x0
            Plane((x1, y0, 0.0), (0, 1, 0), (0, 0, 1), ly, h, (-1, 0, 0), room),  # x = x1
        ]
    return planes


@dataclass
class Landmarks:
    positions: np.ndarray  # (L, 3)
    descriptors: np.ndarray  # (L, 32) uint8
    plane_ids: np.ndarray  # (L,)
    surfel_ids: np.ndarray  # (L,)

    def __len__(self) -> int:
        return int(self.positions.shape[0])


@dataclass
class Scene:
    spec: SceneSpec
    planes: List[Plane]
    surfel_map: SurfelMap
    landmarks: Landmarks
    rooms: List[Tuple[float, float, float, float]]  # free-space footprints (x0, x1, y0, y1)

    def room_of(self, p: np.ndarray) -> int:
        """Index of the footprint containing ``p`` (strictly inside, below the height), or -1."""
        x, y, z = (float(c) for c in p)
        if not 0.0 < z < self.spec.height:
            return -1
        for i, (x0, x1, y0, y1) in enumerate(self.rooms):
            if x0 < x < x1 and y0 < y < y1:
                return i
        return -1

    def contains(self, p: np.ndarray) -> bool:
        return self.room_of(p) >= 0

    def plane_coefficients(self) -> np.ndarray:
        """(P, 4) rows ``(nx, ny, nz, d)``."""
        return np.array([[*pl.normal, pl.offset] for pl in self.planes], dtype=np.float64).reshape(-1, 4)


def _layout(spec: SceneSpec):
    L, W, H = spec.length, spec.width, spec.height
    if spec.kind in ("room", "corridor"):
        return _box_planes(0.0, L, 0.0, W, H, 0), [(0.0, L, 0.0, W)]
    if spec.kind == "two_lane":
        return _box_planes(0.0, L, 0.0, W, H, 0, closed=False), [(0.0, L, 0.0, W)]
    x1 = L + TWIN_GAP
    planes = _box_planes(0.0, L, 0.0, W, H, 0) + _box_planes(x1, x1 + L, 0.0, W, H, 1)
    return planes, [(0.0, L, 0.0, W), (x1, x1 + L, 0.0, W)]


def _tessellate(plane: Plane, pitch: float):
    nu = max(1, int(np.ceil(plane.size_u / pitch)))
    nv = max(1, int(np.ceil(plane.size_v / pitch)))
    su, sv = plane.size_u / nu, plane.size_v / nv
    a, b = np.meshgrid((np.arange(nu) + 0.5) * su, (np.arange(nv) + 0.5) * sv, indexing="ij")
    return plane.point(a.ravel(), b.ravel()), (nu, nv, su, sv)


def generate_scene(spec: SceneSpec) -> Scene:
    """Deterministic world for ``spec``: surfels on every plane, landmarks sampled on the planes.

    In ``twin_rooms`` the second room repeats the first one's landmarks, descriptors
    included, shifted along x.
    """
    rng = np.random.default_rng([spec.seed, 0])
    planes, rooms = _layout(spec)
    prototypes = random_descriptors(spec.prototypes, rng)
    margin = max(3.0 * spec.surfel_radius, 0.1)

    centers, normals, grids, first_ids = [], [], [], []
    for plane in planes:
        first_ids.append(sum(c.shape[0] for c in centers))
        c, grid = _tessellate(plane, spec.pitch)
        centers.append(c)
        normals.append(np.broadcast_to(np.asarray(plane.normal, dtype=np.float64), c.shape))
        grids.append(grid)
    centers_a = np.vstack(centers)
    surfel_map = SurfelMap(centers_a, np.vstack(normals), np.full(centers_a.shape[0], spec.surfel_radius))

    shared = spec.kind == "twin_rooms"
    per_room = len(planes) // 2 if shared else len(planes)
    positions, descriptors, plane_ids, surfel_ids = [], [], [], []
    for pid, plane in enumerate(planes):
        if shared and pid >= per_room:
            src = pid - per_room
            sel = np.flatnonzero(np.concatenate(plane_ids) == src) if plane_ids else np.zeros(0, dtype=np.int64)
            shift = np.asarray(plane.origin) - np.asarray(planes[src].origin)
            pos = np.vstack(positions)[sel] + shift
            desc = np.vstack(descriptors)[sel]
            a = (pos - np.asarray(plane.origin)) @ np.asarray(plane.axis_u, dtype=np.float64)
            b = (pos - np.asarray(plane.origin)) @ np.asarray(plane.axis_v, dtype=np.float64)
        else:
            count = int(round(plane.area * spec.landmark_density))
            a = rng.uniform(margin, plane.size_u - margin, count)
            b = rng.uniform(margin, plane.size_v - margin, count)
            pos = plane.point(a, b)
            proto = rng.integers(0, spec.prototypes, count)
            desc = np.vstack([flip_bits(prototypes[k], spec.prototype_flips, rng) for k in proto]) if count else np.zeros((0, 32), dtype=np.uint8)
        nu, nv, su, sv = grids[pid]
        iu = np.clip(np.floor(a / su).astype(np.int64), 0, nu - 1)
        iv = np.clip(np.floor(b / sv).astype(np.int64), 0, nv - 1)
        positions.append(pos.reshape(-1, 3))
        descriptors.append(desc)
        plane_ids.append(np.full(pos.shape[0], pid, dtype=np.int64))
        surfel_ids.append(first_ids[pid] + iu * nv + iv)

    landmarks = Landmarks(
        np.vstack(positions), np.vstack(descriptors).astype(np.uint8), np.concatenate(plane_ids), np.concatenate(surfel_ids)
    )
    logger.info(
        "Generated %s scene: %d planes, %d surfels, %d landmarks", spec.kind, len(planes), len(surfel_map), len(landmarks)
    )
    return Scene(spec, planes, surfel_map, landmarks, rooms)


def occluded(scene: Scene, eye: np.ndarray, targets: np.ndarray, target_planes: np.ndarray) -> np.ndarray:
    """True where the segment ``eye -> target`` crosses a plane rectangle other than the target's own."""
    eye = np.asarray(eye, dtype=np.float64)
    d = targets - eye
    blocked = np.zeros(targets.shape[0], dtype=bool)
    for pid, plane in enumerate(scene.planes):
        n = np.asarray(plane.normal, dtype=np.float64)
        denom = d @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            s = -(n @ eye + plane.offset) / denom
        hit = (np.abs(denom) > 1e-12) & (s > 1e-9) & (s < 1.0 - 1e-9) & (target_planes != pid)
        if not hit.any():
            continue
        x = eye + s[:, None] * d
        rel = x - np.asarray(plane.origin)
        a = rel @ np.asarray(plane.axis_u, dtype=np.float64)
        b = rel @ np.asarray(plane.axis_v, dtype=np.float64)
        blocked |= hit & (a >= 0.0) & (a <= plane.size_u) & (b >= 0.0) & (b <= plane.size_v)
    return blocked
