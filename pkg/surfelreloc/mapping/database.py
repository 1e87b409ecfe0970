"""The visual database: keyframes, surfel-anchored map points, covisibility and retrieval."""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from surfelreloc.descriptors.binary import DEFAULT_MAX_DISTANCE, DEFAULT_RATIO, hamming_matrix
from surfelreloc.descriptors.features import FrameFeatures
from surfelreloc.descriptors.global_descriptor import describe_global
from surfelreloc.descriptors.retrieval import (
    BaseRetrievalIndex,
    EmptyDatabaseError,
    FrameSignature,
    create_retrieval_index,
)
from surfelreloc.descriptors.vocabulary import Vocabulary
from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose

from .covisibility import CovisibilityGraph
from .matching import DEFAULT_GRID_CELL, DEFAULT_WINDOW, local_grid_match
from .states import DatabaseStats, FrameReport, empty_frame_report
from .surfel_map import EMPTY, SurfelMap, associate_keypoints, render_index_map

logger = logging.getLogger(__name__)


@dataclass
class DatabaseSettings:
    window: float = DEFAULT_WINDOW  # px, scaled by 1.2**octave
    grid_cell: float = DEFAULT_GRID_CELL  # px
    ratio: float = DEFAULT_RATIO
    max_distance: int = DEFAULT_MAX_DISTANCE  # bits
    duplicate_ratio: float = 0.9
    duplicate_min_observers: int = 3
    recent_point_window: int = 2  # keyframes a new point has to be re-observed in
    retrieval_backend: str = "vlad"  # Options: vlad, bow
    accelerator: str = "auto"  # vlad only: auto, brute, kdtree

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Keyframe:
    id: int
    timestamp: float
    pose: SE3Pose
    features: FrameFeatures
    point_ids: np.ndarray  # per keypoint, -1 when unlinked
    surfel_ids: np.ndarray  # per keypoint, EMPTY when unassociated
    neighbors: Tuple[frozenset, ...]  # per keypoint neighboring surfel ids
    words: np.ndarray  # per keypoint visual word

    def linked(self) -> np.ndarray:
        """Indices of keypoints linked to a map point."""
        return np.flatnonzero(self.point_ids >= 0)

    def map_point_ids(self) -> np.ndarray:
        return self.point_ids[self.point_ids >= 0]

    def observed_surfels(self) -> Set[int]:
        return {int(s) for s in self.surfel_ids if s != EMPTY}

    def signature(self) -> FrameSignature:
        return FrameSignature(self.features.global_descriptor, self.words)


@dataclass
class MapPoint:
    id: int
    position: np.ndarray
    surfel_id: int
    descriptor: np.ndarray
    creation_frame: int
    observations: Dict[int, int] = field(default_factory=dict)  # keyframe id -> keypoint index

    def anchor(self) -> int:
        """First keyframe observing this point."""
        return min(self.observations)


def update_representative_descriptor(
    point: MapPoint, descriptor_of: Callable[[int, int], np.ndarray]
) -> np.ndarray:
    """Observation descriptor with the smallest median Hamming distance to the others.

    Ties go to the earliest observation.
    """
    obs = list(point.observations.items())
    descs = np.vstack([descriptor_of(kf, idx) for kf, idx in obs])
    if len(obs) == 1:
        return descs[0].copy()
    D = hamming_matrix(descs, descs).astype(np.float64)
    np.fill_diagonal(D, np.nan)
    medians = np.nanmedian(D, axis=1)
    return descs[int(np.argmin(medians))].copy()


@dataclass
class CullResult:
    keyframes: List[int] = field(default_factory=list)
    points: List[int] = field(default_factory=list)


class VisualDatabase:
    """Keyframes and map points built from posed frames against a surfel map.

    Mutation (``process_frame``, ``cull``, pose updates) is single-writer and must run
    in timestamp order. Queries only read.
    """

    def __init__(
        self,
        camera: PinholeCamera,
        vocabulary: Vocabulary,
        settings: Optional[DatabaseSettings] = None,
    ):
        self.camera = camera
        self.vocabulary = vocabulary
        self.settings = settings or DatabaseSettings()
        self.keyframes: Dict[int, Keyframe] = {}
        self.points: Dict[int, MapPoint] = {}
        self.covisibility = CovisibilityGraph()
        self.index: BaseRetrievalIndex = self._new_index()
        self.next_keyframe_id = 0
        self.next_point_id = 0
        self.recent_points: Dict[int, int] = {}  # point id -> creation keyframe
        self._surfel_points: Dict[int, Set[int]] = defaultdict(set)
        self._surfel_keyframes: Dict[int, Set[int]] = defaultdict(set)

    def _new_index(self) -> BaseRetrievalIndex:
        kwargs = {"accelerator": self.settings.accelerator} if self.settings.retrieval_backend == "vlad" else {}
        return create_retrieval_index(self.settings.retrieval_backend, **kwargs)

    # ------------------------------------------------------------------ lookups

    def __len__(self) -> int:
        return len(self.keyframes)

    def descriptor_of(self, keyframe_id: int, keypoint: int) -> np.ndarray:
        return self.keyframes[keyframe_id].features.descriptors[keypoint]

    def points_on_surfels(self, surfels: Iterable[int]) -> Set[int]:
        out: Set[int] = set()
        for s in surfels:
            out |= self._surfel_points.get(int(s), set())
        return out

    def keyframes_observing(self, surfels: Iterable[int]) -> List[int]:
        out: Set[int] = set()
        for s in surfels:
            out |= self._surfel_keyframes.get(int(s), set())
        return sorted(out)

    def describe(self, features: FrameFeatures) -> FrameSignature:
        words = self.vocabulary.quantize(features.descriptors)
        if features.global_descriptor is None:
            features.global_descriptor = describe_global(self.vocabulary, features.descriptors)
        return FrameSignature(features.global_descriptor, words)

    def query_index(self, signature: FrameSignature, k: int) -> List[Tuple[int, float]]:
        """Top-``k`` keyframes by global similarity, descending, ties by smaller id."""
        if not self.keyframes:
            raise EmptyDatabaseError("Visual database has no keyframes")
        return self.index.query(signature, k)

    # ------------------------------------------------------------------ building

    def process_frame(
        self, features: FrameFeatures, pose: SE3Pose, surfel_map: SurfelMap, frame: int = 0
    ) -> FrameReport:
        """Insert one posed frame as a keyframe.

        Renders the surfel index map, associates keypoints, matches covisible map points
        in the local grid, fuses matches, creates points on unmatched surfel-associated
        keypoints, updates covisibility, culls and indexes the frame.
        """
        report = empty_frame_report(frame, float(features.timestamp), len(features))
        timing = report["timing_ms"]
        s = self.settings

        t0 = time.perf_counter()
        index_map = render_index_map(surfel_map, pose, self.camera)
        report["rendered_pixels"] = index_map.rendered_count()
        t1 = time.perf_counter()
        timing["render"] = (t1 - t0) * 1e3
        if report["rendered_pixels"] == 0:
            report["reason"] = "outside-map"
            logger.warning("Frame %d rejected: no surfel rendered at its pose", frame)
            return report

        assoc = associate_keypoints(index_map, features.uv, features.sizes)
        associated = assoc.associated()
        report["associated"] = int(associated.size)
        report["skipped_keypoints"] = assoc.skipped
        t2 = time.perf_counter()
        timing["associate"] = (t2 - t1) * 1e3

        covisible = self.keyframes_observing(assoc.surfel_ids[associated])
        report["covisible_frames"] = len(covisible)
        matches = []
        candidate_ids = np.zeros(0, dtype=np.int64)
        if covisible:
            candidate_ids = np.unique(np.concatenate([self.keyframes[k].map_point_ids() for k in covisible]))
            positions = np.array([self.points[p].position for p in candidate_ids.tolist()]).reshape(-1, 3)
            uv, valid = self.camera.project_points(pose.inverse_transform(positions))
            valid &= self.camera.in_image(uv)
            candidate_ids = candidate_ids[valid]
            if candidate_ids.size:
                descriptors = np.vstack([self.points[p].descriptor for p in candidate_ids.tolist()])
                matches = local_grid_match(
                    uv[valid], descriptors, features.uv, features.octaves, features.descriptors,
                    s.window, s.grid_cell, s.ratio, s.max_distance,
                )
        report["candidate_points"] = int(candidate_ids.size)
        matched_kps = {m.candidate for m in matches}
        new_kps = [int(i) for i in associated if int(i) not in matched_kps]
        t3 = time.perf_counter()
        timing["match"] = (t3 - t2) * 1e3

        if not matches and not new_kps:
            report["reason"] = "no-map-points"
            logger.warning("Frame %d rejected: no keypoint can be linked to a map point", frame)
            return report
        try:
            signature = self.describe(features)
        except ValueError as exc:
            report["reason"] = "degenerate-global"
            logger.warning("Frame %d rejected: %s", frame, exc)
            return report

        kf_id = self.next_keyframe_id
        self.next_keyframe_id += 1
        kf = Keyframe(
            id=kf_id,
            timestamp=float(features.timestamp),
            pose=pose,
            features=features,
            point_ids=np.full(len(features), -1, dtype=np.int64),
            surfel_ids=assoc.surfel_ids.copy(),
            neighbors=assoc.neighbors,
            words=signature.words,
        )
        self.keyframes[kf_id] = kf

        for m in matches:
            pid = int(candidate_ids[m.query])
            self._attach(pid, kf_id, m.candidate)
        for kp in new_kps:
            surfel = int(assoc.surfel_ids[kp])
            pid = self.next_point_id
            self.next_point_id += 1
            point = MapPoint(
                id=pid,
                position=np.array(surfel_map.centers[surfel]),
                surfel_id=surfel,
                descriptor=features.descriptors[kp].copy(),
                creation_frame=kf_id,
            )
            self.points[pid] = point
            self._surfel_points[surfel].add(pid)
            self.recent_points[pid] = kf_id
            self._attach(pid, kf_id, kp)
        for surfel in kf.observed_surfels():
            self._surfel_keyframes[surfel].add(kf_id)
        report["matched"] = len(matches)
        report["new_points"] = len(new_kps)
        t4 = time.perf_counter()
        timing["update"] = (t4 - t3) * 1e3

        culled = self.cull(kf_id)
        report["culled_keyframes"] = culled.keyframes
        report["culled_points"] = len(culled.points)
        if kf_id in self.keyframes:
            self.index.add(kf_id, signature)
        timing["cull"] = (time.perf_counter() - t4) * 1e3

        report["status"] = "accepted"
        report["keyframe_id"] = kf_id
        logger.info(
            "Frame %d -> keyframe %d: %d matched, %d new points, %d keyframes culled",
            frame, kf_id, len(matches), len(new_kps), len(culled.keyframes),
        )
        return report

    def _attach(self, pid: int, kf_id: int, keypoint: int) -> None:
        point = self.points[pid]
        for other in point.observations:
            self.covisibility.add(kf_id, other)
        point.observations[kf_id] = int(keypoint)
        self.keyframes[kf_id].point_ids[keypoint] = pid
        point.descriptor = update_representative_descriptor(point, self.descriptor_of)

    def _detach(self, pid: int, kf_id: int) -> bool:
        """Drop one observation; returns True when the point was orphaned and removed."""
        point = self.points[pid]
        idx = point.observations.pop(kf_id)
        self.keyframes[kf_id].point_ids[idx] = -1
        for other in point.observations:
            self.covisibility.decrement(kf_id, other)
        if not point.observations:
            self._drop_point(pid)
            return True
        point.descriptor = update_representative_descriptor(point, self.descriptor_of)
        return False

    def _drop_point(self, pid: int) -> None:
        point = self.points.pop(pid)
        self.recent_points.pop(pid, None)
        members = self._surfel_points.get(point.surfel_id)
        if members is not None:
            members.discard(pid)
            if not members:
                del self._surfel_points[point.surfel_id]

    def remove_point(self, pid: int) -> None:
        point = self.points[pid]
        for kf_id in list(point.observations):
            if self._detach(pid, kf_id):
                return

    def remove_keyframe(self, kf_id: int) -> List[int]:
        """Remove a keyframe, detaching its observations; returns orphaned point ids."""
        kf = self.keyframes[kf_id]
        orphaned = [int(pid) for pid in kf.map_point_ids() if self._detach(int(pid), kf_id)]
        for surfel in kf.observed_surfels():
            members = self._surfel_keyframes.get(surfel)
            if members is not None:
                members.discard(kf_id)
                if not members:
                    del self._surfel_keyframes[surfel]
        self.covisibility.remove_node(kf_id)
        self.index.remove(kf_id)
        del self.keyframes[kf_id]
        return orphaned

    # ------------------------------------------------------------------ culling

    def cull(self, new_keyframe_id: int) -> CullResult:
        """Apply the recent-point rule and duplicate-keyframe culling after a new keyframe.

        A point created at keyframe ``c`` is removed once keyframe ``c + 2`` is processed
        unless a later keyframe observes it. A keyframe is a duplicate when at least 90%
        of its map-point-linked keypoints see points with at least three other live
        observers; the new keyframe is checked first, then its covisible keyframes in
        ascending id.
        """
        s = self.settings
        result = CullResult()

        for pid, created in sorted(self.recent_points.items()):
            if new_keyframe_id - created < s.recent_point_window:
                continue
            del self.recent_points[pid]
            point = self.points.get(pid)
            if point is not None and not any(k > created for k in point.observations):
                self.remove_point(pid)
                result.points.append(pid)

        if new_keyframe_id in self.keyframes:
            candidates = [new_keyframe_id] + sorted(self.covisibility.neighbors(new_keyframe_id))
            for kf_id in candidates:
                kf = self.keyframes.get(kf_id)
                if kf is None:
                    continue
                linked = kf.map_point_ids()
                if linked.size == 0:
                    continue
                redundant = sum(
                    1 for pid in linked.tolist()
                    if len(self.points[pid].observations) - 1 >= s.duplicate_min_observers
                )
                if redundant >= s.duplicate_ratio * linked.size - 1e-9:
                    result.points.extend(self.remove_keyframe(kf_id))
                    result.keyframes.append(kf_id)

        for kf_id in sorted(self.keyframes):
            if self.keyframes[kf_id].map_point_ids().size == 0:
                self.remove_keyframe(kf_id)
                result.keyframes.append(kf_id)

        if result.keyframes or result.points:
            logger.debug("Culled keyframes %s and %d map points", result.keyframes, len(result.points))
        return result

    # ------------------------------------------------------------------ maintenance

    def set_poses(self, poses: Dict[int, SE3Pose]) -> None:
        for kf_id, pose in poses.items():
            self.keyframes[kf_id].pose = pose

    def rebuild_derived(self) -> None:
        """Recompute surfel lookups and the retrieval index from keyframes and points."""
        self._surfel_points = defaultdict(set)
        for pid, point in self.points.items():
            self._surfel_points[point.surfel_id].add(pid)
        self._surfel_keyframes = defaultdict(set)
        self.index = self._new_index()
        for kf_id in sorted(self.keyframes):
            kf = self.keyframes[kf_id]
            for surfel in kf.observed_surfels():
                self._surfel_keyframes[surfel].add(kf_id)
            self.index.add(kf_id, kf.signature())

    def stats(self) -> DatabaseStats:
        return database_stats(self)


def database_stats(db: VisualDatabase) -> DatabaseStats:
    return DatabaseStats(
        keyframes=len(db.keyframes),
        map_points=len(db.points),
        observations=sum(len(p.observations) for p in db.points.values()),
        covisibility_edges=len(db.covisibility),
        next_keyframe_id=db.next_keyframe_id,
    )


def check_integrity(db: VisualDatabase) -> List[str]:
    """Return every referential-integrity violation found (empty when consistent)."""
    problems: List[str] = []
    for kf_id, kf in db.keyframes.items():
        if kf.map_point_ids().size == 0:
            problems.append(f"keyframe {kf_id} has no map points")
        for idx in kf.linked().tolist():
            pid = int(kf.point_ids[idx])
            point = db.points.get(pid)
            if point is None:
                problems.append(f"keyframe {kf_id} keypoint {idx} links missing point {pid}")
            elif point.observations.get(kf_id) != idx:
                problems.append(f"point {pid} does not list keyframe {kf_id} keypoint {idx}")
        for idx, nbrs in enumerate(kf.neighbors):
            if int(kf.surfel_ids[idx]) in nbrs:
                problems.append(f"keyframe {kf_id} keypoint {idx} lists its own surfel as neighbor")
    for pid, point in db.points.items():
        if not point.observations:
            problems.append(f"point {pid} has no observations")
            continue
        for kf_id, idx in point.observations.items():
            kf = db.keyframes.get(kf_id)
            if kf is None:
                problems.append(f"point {pid} observed by missing keyframe {kf_id}")
            elif int(kf.point_ids[idx]) != pid:
                problems.append(f"keyframe {kf_id} keypoint {idx} does not link point {pid}")
        descs = [db.descriptor_of(kf, idx) for kf, idx in point.observations.items() if kf in db.keyframes]
        if descs and not any(np.array_equal(point.descriptor, d) for d in descs):
            problems.append(f"point {pid} descriptor is not one of its observations")
        if pid not in db.points_on_surfels([point.surfel_id]):
            problems.append(f"point {pid} missing from surfel {point.surfel_id} lookup")
    recomputed = CovisibilityGraph.from_observations(p.observations for p in db.points.values())
    if recomputed != db.covisibility:
        problems.append("covisibility graph differs from the one recomputed from observations")
    if db.index.ids() != sorted(db.keyframes):
        problems.append("retrieval index ids differ from keyframe ids")
    return problems
