"""Hierarchical relocalization of query frames against a visual database."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from surfelreloc.descriptors.binary import match_ratio
from surfelreloc.descriptors.features import FrameFeatures
from surfelreloc.geometry.se3 import SE3Pose
from surfelreloc.mapping.surfel_map import EMPTY, SurfelMap
from surfelreloc.optim.reprojection import refine_motion_only

from .candidates import Correspondences, gather_candidate_points, match_candidates
from .clustering import CandidateCluster, cluster_candidates
from .config import RelocConfig
from .essential import essential_check
from .pnp import pnp_ransac
from .refinement import refine_pose
from .states import CandidateTrace, RelocTrace, empty_candidate_trace
from .verification import FAILED, VerificationState

logger = logging.getLogger(__name__)


@dataclass
class RelocalizationResult:
    timestamp: float
    status: str  # verified, inlier-unverified or failed
    pose: Optional[SE3Pose]
    n_in: int
    cluster_count: int
    diagnostics: Optional[RelocTrace] = field(repr=False, default=None)

    def __post_init__(self) -> None:
        if (self.pose is None) != (self.status == FAILED):
            raise ValueError(f"Pose must be present exactly when the status is not failed, got {self.status!r}")


@dataclass
class _Candidate:
    pose: Optional[SE3Pose]
    n_in: int
    score: float
    rank: int


class Relocalizer:
    """Hierarchical single-image relocalization against a visual database.

    Retrieval, covisibility clustering, 2D-3D matching with neighboring-surfel
    expansion, essential-matrix gating, PnP RANSAC and motion-only refinement, followed
    by pose verification against the caller's session state.
    """

    def __init__(self, db, config: Optional[RelocConfig] = None, surfel_map: Optional[SurfelMap] = None):
        self.db = db
        self.config = config or RelocConfig()
        self.surfel_map = surfel_map
        if self.config.mode == "naive" and surfel_map is None:
            raise ValueError("Naive relocalization needs the surfel map")

    def relocalize(self, features: FrameFeatures, state: Optional[VerificationState] = None) -> RelocalizationResult:
        cfg = self.config
        state = state if state is not None else VerificationState()
        timing = {}
        trace = RelocTrace(
            timestamp=float(features.timestamp), retrieved=[], candidates=[], best=None, reason=None, timing_ms=timing
        )

        t0 = time.perf_counter()
        try:
            signature = self.db.describe(features)
        except ValueError as exc:
            trace["reason"] = "degenerate-global"
            logger.warning("Query %.6f failed: %s", features.timestamp, exc)
            return RelocalizationResult(float(features.timestamp), FAILED, None, 0, 0, trace)
        retrieved = self.db.query_index(signature, cfg.top_k)
        trace["retrieved"] = [[int(k), float(s)] for k, s in retrieved]
        t1 = time.perf_counter()
        timing["retrieval"] = (t1 - t0) * 1e3

        if cfg.mode == "naive":
            clusters = [CandidateCluster((retrieved[0][0],), retrieved[0][0], retrieved[0][1])]
        else:
            clusters = cluster_candidates(self.db.covisibility, retrieved, cfg.n_max)
        timing["clustering"] = (time.perf_counter() - t1) * 1e3

        best: Optional[_Candidate] = None
        for rank, cluster in enumerate(clusters):
            rng = np.random.default_rng([cfg.seed, rank])
            ct = empty_candidate_trace(rank, cluster.canonical, cluster.score, list(cluster.members))
            if cfg.mode == "naive":
                cand = self._run_naive(features, cluster, rng, ct, timing)
            else:
                cand = self._run_cluster(features, cluster, rng, ct, timing)
            trace["candidates"].append(ct)
            if cand.pose is None:
                continue
            if best is None or (cand.n_in, cand.score) > (best.n_in, best.score):
                best = cand
                trace["best"] = len(trace["candidates"]) - 1

        if best is None:
            trace["reason"] = "no-candidate-pose"
            logger.info("Query %.6f failed: no candidate produced a pose", features.timestamp)
            return RelocalizationResult(float(features.timestamp), FAILED, None, 0, len(clusters), trace)

        status = state.update(best.n_in, best.pose, cfg.inlier_threshold, cfg.verify_distance)
        pose = None if status == FAILED else best.pose
        if status == FAILED:
            trace["reason"] = "too-few-inliers"
        logger.info("Query %.6f: %s with %d inliers", features.timestamp, status, best.n_in)
        return RelocalizationResult(float(features.timestamp), status, pose, best.n_in, len(clusters), trace)

    def _run_cluster(self, features, cluster: CandidateCluster, rng, ct: CandidateTrace, timing) -> _Candidate:
        cfg = self.config
        fail = _Candidate(None, 0, cluster.score, ct["rank"])
        t0 = time.perf_counter()
        points = gather_candidate_points(self.db, cluster.canonical, cfg.n_co)
        use_neighbors = cfg.mode == "full"
        ct["visible_points"] = int(points.visible.size)
        ct["neighbor_points"] = int(points.neighbor.size) if use_neighbors else 0
        corr = match_candidates(self.db, features, points, use_neighbors, cfg.ratio, cfg.max_distance)
        ct["matches"] = len(corr)
        ct["neighbor_matches"] = int(corr.from_neighbors.sum())
        t1 = time.perf_counter()
        _accumulate(timing, "matching", t1 - t0)

        if cfg.use_essential:
            check = essential_check(
                self.db, cluster.canonical, corr, cfg.essential_threshold, cfg.essential_iterations, cfg.confidence, rng
            )
            ct["essential_flag"] = check.flag
            corr = corr.select(check.keep)
        ct["essential_kept"] = len(corr)
        t2 = time.perf_counter()
        _accumulate(timing, "essential", t2 - t1)

        pnp = pnp_ransac(
            corr.X, corr.uv, corr.octaves, self.db.camera, rng, cfg.pnp_threshold, cfg.pnp_iterations, cfg.confidence
        )
        ct["pnp_inliers"] = pnp.n_in
        t3 = time.perf_counter()
        _accumulate(timing, "pnp", t3 - t2)
        if pnp.pose is None:
            ct["status"] = f"pnp:{pnp.status}"
            return fail

        candidate_ids = points.all_ids() if use_neighbors else points.visible
        refined = refine_pose(self.db, features, pnp.pose, candidate_ids, corr.select(pnp.inliers), cfg)
        _accumulate(timing, "refine", time.perf_counter() - t3)
        if refined.status != "converged":
            ct["status"] = f"refine:{refined.status}"
            return fail
        ct["n_in"] = refined.n_in
        ct["status"] = "ok"
        return _Candidate(refined.pose, refined.n_in, cluster.score, ct["rank"])

    def _run_naive(self, features, cluster: CandidateCluster, rng, ct: CandidateTrace, timing) -> _Candidate:
        """Match against the single retrieved keyframe and use associated surfel centers as 3D points."""
        cfg = self.config
        fail = _Candidate(None, 0, cluster.score, ct["rank"])
        t0 = time.perf_counter()
        corr = naive_correspondences(self.db.keyframes[cluster.canonical], features, self.surfel_map, cfg)
        ct["matches"] = ct["essential_kept"] = len(corr)
        t1 = time.perf_counter()
        _accumulate(timing, "matching", t1 - t0)

        pnp = pnp_ransac(
            corr.X, corr.uv, corr.octaves, self.db.camera, rng, cfg.pnp_threshold, cfg.pnp_iterations, cfg.confidence
        )
        ct["pnp_inliers"] = pnp.n_in
        t2 = time.perf_counter()
        _accumulate(timing, "pnp", t2 - t1)
        if pnp.pose is None:
            ct["status"] = f"pnp:{pnp.status}"
            return fail
        result = refine_motion_only(
            pnp.pose, corr.X, corr.uv, corr.octaves, self.db.camera, cfg.refine_rounds, cfg.chi2_gate
        )
        _accumulate(timing, "refine", time.perf_counter() - t2)
        if result.status != "converged":
            ct["status"] = f"refine:{result.status}"
            return fail
        ct["n_in"] = result.n_in
        ct["status"] = "ok"
        return _Candidate(result.pose, result.n_in, cluster.score, ct["rank"])


def naive_correspondences(keyframe, features: FrameFeatures, surfel_map: SurfelMap, cfg: RelocConfig) -> Correspondences:
    associated = np.flatnonzero(keyframe.surfel_ids != EMPTY)
    found = match_ratio(
        features.descriptors, keyframe.features.descriptors[associated], cfg.ratio, cfg.max_distance
    )
    kps = np.array([m.query for m in found], dtype=np.int64)
    surfels = keyframe.surfel_ids[associated[[m.candidate for m in found]]].astype(np.int64)
    return Correspondences(
        kps,
        np.full(kps.size, -1, dtype=np.int64),
        surfel_map.centers[surfels].reshape(-1, 3),
        features.uv[kps].reshape(-1, 2),
        features.octaves[kps],
        np.zeros(kps.size, dtype=bool),
    )


def _accumulate(timing: dict, stage: str, seconds: float) -> None:
    timing[stage] = timing.get(stage, 0.0) + seconds * 1e3


def relocalize(
    db,
    features: FrameFeatures,
    config: Optional[RelocConfig] = None,
    state: Optional[VerificationState] = None,
    surfel_map: Optional[SurfelMap] = None,
) -> RelocalizationResult:
    return Relocalizer(db, config, surfel_map).relocalize(features, state)


def relocalize_sequence(relocalizer: Relocalizer, queries) -> Tuple[list, VerificationState]:
    """Relocalize frames in order, threading one verification state through them."""
    state = VerificationState()
    return [relocalizer.relocalize(q, state) for q in queries], state
