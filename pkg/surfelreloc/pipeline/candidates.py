"""Candidate map points of a cluster and their 2D-3D matches against a query."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Set

import numpy as np

from surfelreloc.descriptors.binary import match_ratio
from surfelreloc.descriptors.features import DESCRIPTOR_BYTES, FrameFeatures


@dataclass
class CandidatePoints:
    visible: np.ndarray  # sorted map point ids seen by the canonical keyframe or its covisible keyframes
    neighbor: np.ndarray  # sorted ids on the canonical keyframe's neighboring surfels, minus ``visible``
    keyframes: List[int]  # canonical keyframe followed by its covisible keyframes

    def all_ids(self) -> np.ndarray:
        return np.union1d(self.visible, self.neighbor)


def gather_candidate_points(db, canonical: int, n_co: int) -> CandidatePoints:
    kf = db.keyframes[canonical]
    keyframes = [canonical] + db.covisibility.top_neighbors(canonical, n_co)
    visible: Set[int] = set()
    for k in keyframes:
        visible.update(int(p) for p in db.keyframes[k].map_point_ids())
    neighbor_surfels: Set[int] = set()
    for nbrs in kf.neighbors:
        neighbor_surfels |= nbrs
    neighbor = db.points_on_surfels(neighbor_surfels) - visible
    return CandidatePoints(
        np.array(sorted(visible), dtype=np.int64),
        np.array(sorted(neighbor), dtype=np.int64),
        keyframes,
    )


@dataclass
class Correspondences:
    """Query keypoint to map point matches with everything the solvers need."""

    keypoints: np.ndarray  # (M,) query keypoint index
    point_ids: np.ndarray  # (M,)
    X: np.ndarray  # (M, 3) world positions
    uv: np.ndarray  # (M, 2) query pixels
    octaves: np.ndarray  # (M,)
    from_neighbors: np.ndarray  # (M,) bool

    def __len__(self) -> int:
        return int(self.keypoints.shape[0])

    def select(self, mask: np.ndarray) -> "Correspondences":
        return Correspondences(
            self.keypoints[mask],
            self.point_ids[mask],
            self.X[mask],
            self.uv[mask],
            self.octaves[mask],
            self.from_neighbors[mask],
        )

    @classmethod
    def build(cls, db, features: FrameFeatures, keypoints, point_ids, from_neighbors) -> "Correspondences":
        keypoints = np.asarray(keypoints, dtype=np.int64)
        point_ids = np.asarray(point_ids, dtype=np.int64)
        X = np.array([db.points[int(p)].position for p in point_ids], dtype=np.float64).reshape(-1, 3)
        return cls(
            keypoints,
            point_ids,
            X,
            features.uv[keypoints].reshape(-1, 2),
            features.octaves[keypoints],
            np.asarray(from_neighbors, dtype=bool).reshape(-1),
        )


def _descriptors(db, ids: np.ndarray) -> np.ndarray:
    if ids.size == 0:
        return np.zeros((0, DESCRIPTOR_BYTES), dtype=np.uint8)
    return np.vstack([db.points[int(p)].descriptor for p in ids])


def match_candidates(
    db,
    features: FrameFeatures,
    candidates: CandidatePoints,
    use_neighbors: bool,
    ratio: float,
    max_distance: float,
) -> Correspondences:
    """Ratio-test matching against the visible set, then leftover keypoints against the neighbor set."""
    kps: List[int] = []
    pids: List[int] = []
    from_nbr: List[bool] = []
    for m in match_ratio(features.descriptors, _descriptors(db, candidates.visible), ratio, max_distance):
        kps.append(m.query)
        pids.append(int(candidates.visible[m.candidate]))
        from_nbr.append(False)
    if use_neighbors and candidates.neighbor.size:
        rest = np.setdiff1d(np.arange(len(features)), np.asarray(kps, dtype=np.int64))
        if rest.size:
            found = match_ratio(
                features.descriptors[rest], _descriptors(db, candidates.neighbor), ratio, max_distance
            )
            for m in found:
                kps.append(int(rest[m.query]))
                pids.append(int(candidates.neighbor[m.candidate]))
                from_nbr.append(True)
    return Correspondences.build(db, features, kps, pids, from_nbr)
