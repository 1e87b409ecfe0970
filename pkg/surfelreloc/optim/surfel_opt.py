"""Keyframe pose optimization with surfel reprojection constraints and map point refresh."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from surfelreloc.geometry.camera import Pixel
from surfelreloc.geometry.se3 import SE3Pose

from .levenberg import LeastSquaresProblem, Linearization, levenberg_marquardt
from .surfel_factors import (
    DEN_EPS,
    MAX_DEPTH,
    RHO_MIN,
    DepthLimits,
    SurfelFactors,
    build_surfel_factors,
    evaluate_factors,
    inverse_depth_on_plane,
    point_on_plane,
)

logger = logging.getLogger(__name__)


@dataclass
class OptimizerSettings:
    max_iterations: int = 50
    huber_delta: float = 2.0  # px, on the weighted residual norm
    initial_lambda: float = 1e-4
    relative_tolerance: float = 1e-8
    den_eps: float = DEN_EPS
    rho_min: float = RHO_MIN
    max_depth: float = MAX_DEPTH

    @property
    def limits(self) -> DepthLimits:
        return DepthLimits(self.den_eps, self.rho_min, self.max_depth)


@dataclass
class OptimizationReport:
    status: str
    initial_cost: float
    final_cost: float
    iterations: int
    residual_count: int
    skipped_residuals: int
    pose_update_norms: Dict[int, float] = field(default_factory=dict)  # translation change (m)
    final_positions: Dict[int, List[float]] = field(default_factory=dict, repr=False)
    history: List[dict] = field(default_factory=list, repr=False)

    @property
    def success(self) -> bool:
        return self.status in ("converged", "max-iterations", "stalled", "already-optimal")

    def position_rmse(self, reference: Dict[int, SE3Pose]) -> float:
        """RMSE (m) between optimized keyframe positions and reference poses."""
        errs = [
            np.linalg.norm(np.asarray(pos) - reference[kf].translation)
            for kf, pos in self.final_positions.items()
            if kf in reference
        ]
        return float(np.sqrt(np.mean(np.square(errs)))) if errs else float("nan")

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("final_positions")
        out.pop("history")
        out["pose_update_norms"] = {str(k): v for k, v in self.pose_update_norms.items()}
        out["max_pose_update"] = max(self.pose_update_norms.values(), default=0.0)
        return out

    def write_cost_csv(self, path: Union[str, Path]) -> None:
        frame = pd.DataFrame(self.history, columns=["iteration", "cost", "lambda", "accepted"])
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)


def huber_cost_and_weights(sq_norms: np.ndarray, delta: float):
    """Huber cost of ``sqrt(sq_norms)`` and its IRLS weights."""
    r = np.sqrt(sq_norms)
    inlier = r <= delta
    cost = np.where(inlier, sq_norms, 2.0 * delta * r - delta * delta)
    weights = np.where(inlier, 1.0, delta / np.maximum(r, 1e-300))
    return cost, weights


class SurfelPoseProblem(LeastSquaresProblem):
    """Robust sum of weighted surfel reprojection errors over a set of keyframe poses."""

    def __init__(self, factors: SurfelFactors, camera, keyframe_ids: List[int], settings: OptimizerSettings):
        self.factors = factors
        self.camera = camera
        self.keyframe_ids = keyframe_ids
        self.slot = {k: i for i, k in enumerate(keyframe_ids)}
        self.settings = settings
        self._ia = np.array([self.slot[k] for k in factors.anchor.tolist()], dtype=np.int64)
        self._ib = np.array([self.slot[k] for k in factors.target.tolist()], dtype=np.int64)
        self._w = factors.weights

    def _poses(self, state: List[SE3Pose]) -> Dict[int, SE3Pose]:
        return dict(zip(self.keyframe_ids, state))

    def cost(self, state) -> Optional[float]:
        ev = evaluate_factors(self.factors, self._poses(state), self.camera, False, self.settings.limits)
        if not ev.valid.all():
            return None
        sq = self._w * np.einsum("fi,fi->f", ev.residuals, ev.residuals)
        c, _ = huber_cost_and_weights(sq, self.settings.huber_delta)
        total = float(c.sum())
        return total if np.isfinite(total) else None

    def linearize(self, state) -> Optional[Linearization]:
        ev = evaluate_factors(self.factors, self._poses(state), self.camera, True, self.settings.limits)
        if not ev.valid.all():
            return None
        sq = self._w * np.einsum("fi,fi->f", ev.residuals, ev.residuals)
        c, irls = huber_cost_and_weights(sq, self.settings.huber_delta)
        W = self._w * irls
        dim = 6 * len(self.keyframe_ids)
        H = np.zeros((dim, dim))
        g = np.zeros(dim)
        blocks = [(self._ia, ev.J_anchor), (self._ib, ev.J_target)]
        six = np.arange(6)
        for ii, Ji in blocks:
            gi = np.einsum("fki,f,fk->fi", Ji, W, ev.residuals)
            g += np.bincount((ii[:, None] * 6 + six[None, :]).ravel(), gi.ravel(), minlength=dim)
            for jj, Jj in blocks:
                hb = np.einsum("fki,f,fkj->fij", Ji, W, Jj)
                rows = ii[:, None, None] * 6 + six[None, :, None]
                cols = jj[:, None, None] * 6 + six[None, None, :]
                flat = np.broadcast_to(rows * dim + cols, hb.shape).ravel()
                H += np.bincount(flat, hb.ravel(), minlength=dim * dim).reshape(dim, dim)
        total = float(c.sum())
        if not np.isfinite(total):
            return None
        return Linearization(total, H, g)

    def retract(self, state, delta: np.ndarray):
        return [pose.retract(delta[6 * i : 6 * i + 6]) for i, pose in enumerate(state)]


def optimize_poses(db, surfel_map, settings: Optional[OptimizerSettings] = None) -> OptimizationReport:
    """Jointly refine all keyframe poses against fixed surfel planes.

    Factors that are degenerate at the starting poses are skipped and counted. The
    database poses are replaced only when the optimization finishes with a finite cost.
    """
    settings = settings or OptimizerSettings()
    factors = build_surfel_factors(db, surfel_map)
    initial_poses = {k: kf.pose for k, kf in db.keyframes.items()}
    if len(factors) == 0:
        logger.warning("No surfel reprojection factors: database has no shared map points")
        return OptimizationReport("degenerate", 0.0, 0.0, 0, 0, 0)

    ev = evaluate_factors(factors, initial_poses, db.camera, False, settings.limits)
    skipped = int(np.count_nonzero(~ev.valid))
    factors = factors.select(ev.valid)
    if len(factors) == 0:
        logger.warning("All %d surfel reprojection factors are degenerate", skipped)
        return OptimizationReport("degenerate", 0.0, 0.0, 0, 0, skipped)

    keyframe_ids = factors.keyframe_ids()
    problem = SurfelPoseProblem(factors, db.camera, keyframe_ids, settings)
    state = [initial_poses[k] for k in keyframe_ids]
    result = levenberg_marquardt(
        problem,
        state,
        max_iterations=settings.max_iterations,
        initial_lambda=settings.initial_lambda,
        rel_tol=settings.relative_tolerance,
    )
    if not result.success:
        logger.error("Pose optimization aborted: non-finite cost, database unchanged")
        return OptimizationReport("non-finite", result.initial_cost, result.final_cost, 0, len(factors), skipped)

    status = "already-optimal" if result.iterations == 0 else result.status
    new_poses = dict(zip(keyframe_ids, result.state))
    db.set_poses(new_poses)
    report = OptimizationReport(
        status=status,
        initial_cost=result.initial_cost,
        final_cost=result.final_cost,
        iterations=result.iterations,
        residual_count=len(factors),
        skipped_residuals=skipped,
        pose_update_norms={k: initial_poses[k].distance_to(p) for k, p in new_poses.items()},
        final_positions={k: kf.pose.translation.tolist() for k, kf in db.keyframes.items()},
        history=result.history,
    )
    logger.info(
        "Pose optimization %s: cost %.6g -> %.6g in %d iterations (%d factors, %d skipped)",
        status, report.initial_cost, report.final_cost, report.iterations, len(factors), skipped,
    )
    return report


@dataclass
class RefreshReport:
    updated: int
    degenerate: int


def refresh_map_points(db, surfel_map, settings: Optional[OptimizerSettings] = None) -> RefreshReport:
    """Recompute each map point by intersecting its anchor ray with its surfel plane.

    Points whose anchor ray is degenerate keep their previous position.
    """
    limits = (settings or OptimizerSettings()).limits
    updated = degenerate = 0
    for pid in sorted(db.points):
        point = db.points[pid]
        alpha = point.anchor()
        kf = db.keyframes[alpha]
        p = Pixel(*kf.features.uv[point.observations[alpha]])
        plane = surfel_map.plane(point.surfel_id)
        rho = inverse_depth_on_plane(kf.pose, p, plane, db.camera, limits)
        if rho is None:
            degenerate += 1
            continue
        point.position = point_on_plane(kf.pose, p, rho, db.camera)
        updated += 1
    if degenerate:
        logger.warning("%d map points kept their position (degenerate anchor ray)", degenerate)
    return RefreshReport(updated, degenerate)
