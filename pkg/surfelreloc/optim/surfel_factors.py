"""Plane-induced inverse depth and the surfel reprojection factor with analytic Jacobians.

An anchor keyframe alpha lifts its keypoint onto the unit plane, intersects the ray with
the surfel plane ``n.x + d = 0`` and the resulting world point is reprojected into a
target keyframe beta. Poses are perturbed on the right with tangent order (rho, phi).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from surfelreloc.geometry.camera import PinholeCamera, Pixel
from surfelreloc.geometry.se3 import SE3Pose, batch_skew
from surfelreloc.mapping.surfel_map import PlaneCoeff

DEN_EPS = 1e-6
RHO_MIN = 1e-4
MAX_DEPTH = 1e3
OCTAVE_SCALE = 1.2


@dataclass(frozen=True)
class DepthLimits:
    den_eps: float = DEN_EPS
    rho_min: float = RHO_MIN
    max_depth: float = MAX_DEPTH


def inverse_depth_on_plane(
    pose: SE3Pose, p: Pixel, plane: PlaneCoeff, cam: PinholeCamera, limits: DepthLimits = DepthLimits()
) -> Optional[float]:
    """Inverse depth of pixel ``p`` seen from ``pose`` when its ray hits ``plane``.

    ``rho = -(n . R f) / (n . t + d)`` with ``f`` the unit-plane lift of ``p``. Returns
    ``None`` for near-zero denominators, non-positive or too small inverse depth.
    """
    n = np.asarray(plane.n, dtype=np.float64)
    den = float(n @ pose.translation + plane.d)
    if abs(den) <= limits.den_eps:
        return None
    rho = -float(n @ (pose.R @ cam.lift_unit_plane(p))) / den
    if not (rho > limits.rho_min and 1.0 / rho <= limits.max_depth):
        return None
    return rho


def point_on_plane(pose: SE3Pose, p: Pixel, rho: float, cam: PinholeCamera) -> np.ndarray:
    """World point ``t + R * lift(p) / rho``."""
    return pose.translation + pose.R @ cam.lift_unit_plane(p) / rho


@dataclass(frozen=True)
class SurfelReprojFactor:
    plane: PlaneCoeff
    anchor: int
    p_anchor: Pixel
    target: int
    p_target: Pixel
    octave: int
    point_id: int = -1

    @property
    def weight(self) -> float:
        return 1.0 / OCTAVE_SCALE ** (2 * self.octave)


def surfel_reproj_residual(
    factor: SurfelReprojFactor,
    pose_anchor: SE3Pose,
    pose_target: SE3Pose,
    cam: PinholeCamera,
    limits: DepthLimits = DepthLimits(),
) -> Optional[np.ndarray]:
    """``proj(R_b^T (x - t_b)) - p_b`` for the plane-intersected anchor ray; ``None`` if degenerate."""
    rho = inverse_depth_on_plane(pose_anchor, factor.p_anchor, factor.plane, cam, limits)
    if rho is None:
        return None
    x = point_on_plane(pose_anchor, factor.p_anchor, rho, cam)
    uv = cam.project(pose_target.inverse_transform(x))
    if uv is None:
        return None
    return np.array([uv.u - factor.p_target.u, uv.v - factor.p_target.v])


@dataclass
class SurfelFactors:
    """Column-wise storage of many surfel reprojection factors."""

    anchor: np.ndarray  # (F,) keyframe ids
    target: np.ndarray  # (F,) keyframe ids
    point_ids: np.ndarray  # (F,)
    p_anchor: np.ndarray  # (F, 2)
    p_target: np.ndarray  # (F, 2)
    normals: np.ndarray  # (F, 3)
    offsets: np.ndarray  # (F,)
    octaves: np.ndarray  # (F,)

    def __len__(self) -> int:
        return self.anchor.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.power(OCTAVE_SCALE, -2.0 * self.octaves)

    def keyframe_ids(self) -> List[int]:
        return sorted(set(self.anchor.tolist()) | set(self.target.tolist()))

    def select(self, mask: np.ndarray) -> "SurfelFactors":
        return SurfelFactors(*(getattr(self, f)[mask] for f in self.__dataclass_fields__))

    def __getitem__(self, i: int) -> SurfelReprojFactor:
        return SurfelReprojFactor(
            PlaneCoeff(self.normals[i], float(self.offsets[i])),
            int(self.anchor[i]),
            Pixel(*self.p_anchor[i]),
            int(self.target[i]),
            Pixel(*self.p_target[i]),
            int(self.octaves[i]),
            int(self.point_ids[i]),
        )

    @classmethod
    def from_factors(cls, factors: Sequence[SurfelReprojFactor]) -> "SurfelFactors":
        return cls(
            np.array([f.anchor for f in factors], dtype=np.int64),
            np.array([f.target for f in factors], dtype=np.int64),
            np.array([f.point_id for f in factors], dtype=np.int64),
            np.array([f.p_anchor for f in factors], dtype=np.float64).reshape(-1, 2),
            np.array([f.p_target for f in factors], dtype=np.float64).reshape(-1, 2),
            np.array([f.plane.n for f in factors], dtype=np.float64).reshape(-1, 3),
            np.array([f.plane.d for f in factors], dtype=np.float64),
            np.array([f.octave for f in factors], dtype=np.int64),
        )


def build_surfel_factors(db, surfel_map) -> SurfelFactors:
    """One factor per (anchor, other observer) pair of every multiply observed map point.

    The anchor is the first keyframe observing the point.
    """
    cols: Dict[str, list] = {k: [] for k in ("anchor", "target", "pid", "pa", "pb", "oct", "surfel")}
    for pid in sorted(db.points):
        point = db.points[pid]
        if len(point.observations) < 2:
            continue
        alpha = point.anchor()
        kf_a = db.keyframes[alpha]
        pa = kf_a.features.uv[point.observations[alpha]]
        for beta in sorted(point.observations):
            if beta == alpha:
                continue
            kf_b = db.keyframes[beta]
            idx = point.observations[beta]
            cols["anchor"].append(alpha)
            cols["target"].append(beta)
            cols["pid"].append(pid)
            cols["pa"].append(pa)
            cols["pb"].append(kf_b.features.uv[idx])
            cols["oct"].append(int(kf_b.features.octaves[idx]))
            cols["surfel"].append(point.surfel_id)
    surfels = np.asarray(cols["surfel"], dtype=np.int64)
    return SurfelFactors(
        np.asarray(cols["anchor"], dtype=np.int64),
        np.asarray(cols["target"], dtype=np.int64),
        np.asarray(cols["pid"], dtype=np.int64),
        np.asarray(cols["pa"], dtype=np.float64).reshape(-1, 2),
        np.asarray(cols["pb"], dtype=np.float64).reshape(-1, 2),
        surfel_map.normals[surfels].reshape(-1, 3),
        surfel_map.plane_offsets[surfels],
        np.asarray(cols["oct"], dtype=np.int64),
    )


class FactorEvaluation(NamedTuple):
    residuals: np.ndarray  # (F, 2)
    valid: np.ndarray  # (F,) bool
    J_anchor: Optional[np.ndarray]  # (F, 2, 6)
    J_target: Optional[np.ndarray]  # (F, 2, 6)


def evaluate_factors(
    factors: SurfelFactors,
    poses: Dict[int, SE3Pose],
    cam: PinholeCamera,
    jacobians: bool = False,
    limits: DepthLimits = DepthLimits(),
) -> FactorEvaluation:
    """Vectorized residuals (and Jacobians) of all factors at the given keyframe poses."""
    F = len(factors)
    R_a = np.array([poses[k].R for k in factors.anchor.tolist()]).reshape(F, 3, 3)
    t_a = np.array([poses[k].translation for k in factors.anchor.tolist()]).reshape(F, 3)
    R_b = np.array([poses[k].R for k in factors.target.tolist()]).reshape(F, 3, 3)
    t_b = np.array([poses[k].translation for k in factors.target.tolist()]).reshape(F, 3)
    n, d = factors.normals, factors.offsets

    f = cam.lift_points(factors.p_anchor)
    m = np.einsum("fij,fj->fi", R_a, f)
    a = np.einsum("fi,fi->f", n, m)
    den = np.einsum("fi,fi->f", n, t_a) + d
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = -a / den
        depth = 1.0 / rho
    valid = (np.abs(den) > limits.den_eps) & (rho > limits.rho_min) & (depth <= limits.max_depth)
    s = np.where(valid, depth, 0.0)
    x = t_a + s[:, None] * m
    y = np.einsum("fji,fj->fi", R_b, x - t_b)
    valid &= y[:, 2] > 0.0
    y_safe = np.where(valid[:, None], y, np.array([0.0, 0.0, 1.0]))
    uv = np.column_stack(
        [cam.fx * y_safe[:, 0] / y_safe[:, 2] + cam.cx, cam.fy * y_safe[:, 1] / y_safe[:, 2] + cam.cy]
    )
    residuals = np.where(valid[:, None], uv - factors.p_target, 0.0)
    if not jacobians:
        return FactorEvaluation(residuals, valid, None, None)

    J_pi = cam.projection_jacobian(y_safe)
    a_safe = np.where(valid, a, 1.0)
    # dx/dxi_a = (I - m n^T / a) [R_a, -s R_a [f]x]
    P = np.eye(3)[None] - np.einsum("fi,fj->fij", m, n) / a_safe[:, None, None]
    J_x_a = np.concatenate([R_a, -s[:, None, None] * np.einsum("fij,fjk->fik", R_a, batch_skew(f))], axis=2)
    J_x_a = np.einsum("fij,fjk->fik", P, J_x_a)
    J_y_a = np.einsum("fji,fjk->fik", R_b, J_x_a)
    J_y_b = np.concatenate([-np.broadcast_to(np.eye(3), (F, 3, 3)), batch_skew(y_safe)], axis=2)
    J_a = np.einsum("fij,fjk->fik", J_pi, J_y_a)
    J_b = np.einsum("fij,fjk->fik", J_pi, J_y_b)
    J_a[~valid] = 0.0
    J_b[~valid] = 0.0
    return FactorEvaluation(residuals, valid, J_a, J_b)
