"""Re-matching with a rough pose followed by motion-only refinement."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from surfelreloc.descriptors.features import FrameFeatures
from surfelreloc.geometry.se3 import SE3Pose
from surfelreloc.mapping.matching import local_grid_match
from surfelreloc.optim.reprojection import refine_motion_only

from .candidates import Correspondences
from .config import RelocConfig

logger = logging.getLogger(__name__)


@dataclass
class RefinedPose:
    pose: SE3Pose
    n_in: int
    matches: Correspondences
    inliers: np.ndarray
    status: str


def regrid_matches(
    db, features: FrameFeatures, pose: SE3Pose, candidate_ids: np.ndarray, seed: Correspondences, config: RelocConfig
) -> Correspondences:
    """Seed matches plus local-grid matches of the candidate points projected with ``pose``.

    Keypoints and points already used by the seed matches are not matched again.
    """
    used_kps = set(seed.keypoints.tolist())
    used_pts = set(seed.point_ids.tolist())
    free = np.array([p for p in candidate_ids.tolist() if p not in used_pts], dtype=np.int64)
    kps, pids = seed.keypoints.tolist(), seed.point_ids.tolist()
    from_nbr = seed.from_neighbors.tolist()
    if free.size:
        X = np.array([db.points[int(p)].position for p in free]).reshape(-1, 3)
        uv, valid = db.camera.project_points(pose.inverse_transform(X))
        valid &= db.camera.in_image(uv)
        free = free[valid]
        open_kps = np.array([i for i in range(len(features)) if i not in used_kps], dtype=np.int64)
        if free.size and open_kps.size:
            descriptors = np.vstack([db.points[int(p)].descriptor for p in free])
            found = local_grid_match(
                uv[valid],
                descriptors,
                features.uv[open_kps],
                features.octaves[open_kps],
                features.descriptors[open_kps],
                config.window,
                config.grid_cell,
                config.ratio,
                config.max_distance,
            )
            for m in found:
                kps.append(int(open_kps[m.candidate]))
                pids.append(int(free[m.query]))
                from_nbr.append(False)
    return Correspondences.build(db, features, kps, pids, from_nbr)


def refine_pose(
    db, features: FrameFeatures, rough: SE3Pose, candidate_ids: np.ndarray, seed: Correspondences, config: RelocConfig
) -> RefinedPose:
    matches = regrid_matches(db, features, rough, candidate_ids, seed, config)
    result = refine_motion_only(
        rough, matches.X, matches.uv, matches.octaves, db.camera, rounds=config.refine_rounds, chi2_gate=config.chi2_gate
    )
    logger.debug("Refined pose with %d of %d re-matched points as inliers", result.n_in, len(matches))
    return RefinedPose(result.pose, result.n_in, matches, result.inliers, result.status)
