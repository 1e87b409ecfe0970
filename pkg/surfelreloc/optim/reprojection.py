"""Motion-only pose refinement against fixed 3D points."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose, batch_skew

from .levenberg import LeastSquaresProblem, Linearization, levenberg_marquardt
from .surfel_opt import huber_cost_and_weights

logger = logging.getLogger(__name__)

CHI2_2DOF_95 = 5.991
OCTAVE_SCALE = 1.2


def reprojection_errors(pose: SE3Pose, X: np.ndarray, uv: np.ndarray, cam: PinholeCamera, jacobians: bool = False):
    """``e = p - proj(R^T (x - t))`` per point, a validity mask and optionally ``de/dxi`` (N, 2, 6)."""
    y = pose.inverse_transform(np.asarray(X, dtype=np.float64).reshape(-1, 3))
    valid = y[:, 2] > 0.0
    y_safe = np.where(valid[:, None], y, np.array([0.0, 0.0, 1.0]))
    proj = np.column_stack(
        [cam.fx * y_safe[:, 0] / y_safe[:, 2] + cam.cx, cam.fy * y_safe[:, 1] / y_safe[:, 2] + cam.cy]
    )
    e = np.where(valid[:, None], np.asarray(uv).reshape(-1, 2) - proj, np.inf)
    if not jacobians:
        return e, valid, None
    n = y.shape[0]
    J_y = np.concatenate([np.broadcast_to(np.eye(3), (n, 3, 3)), -batch_skew(y_safe)], axis=2)
    J = np.einsum("nij,njk->nik", cam.projection_jacobian(y_safe), J_y)
    J[~valid] = 0.0
    return e, valid, J


def chi2_values(pose: SE3Pose, X: np.ndarray, uv: np.ndarray, octaves: np.ndarray, cam: PinholeCamera) -> np.ndarray:
    """``e^T Omega^-1 e`` with ``Omega = (1.2**octave)^2 I``; inf behind the camera."""
    e, valid, _ = reprojection_errors(pose, X, uv, cam)
    inv_sigma2 = np.power(OCTAVE_SCALE, -2.0 * np.asarray(octaves, dtype=np.float64))
    out = np.full(e.shape[0], np.inf)
    out[valid] = inv_sigma2[valid] * np.einsum("ni,ni->n", e[valid], e[valid])
    return out


class MotionOnlyProblem(LeastSquaresProblem):
    def __init__(self, X, uv, octaves, cam: PinholeCamera, huber_delta: Optional[float] = None):
        self.X = np.asarray(X, dtype=np.float64).reshape(-1, 3)
        self.uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
        self.info = np.power(OCTAVE_SCALE, -2.0 * np.asarray(octaves, dtype=np.float64))
        self.cam = cam
        self.huber_delta = huber_delta

    def _robust(self, chi2: np.ndarray):
        if self.huber_delta is None:
            return chi2, np.ones_like(chi2)
        return huber_cost_and_weights(chi2, self.huber_delta)

    def cost(self, state: SE3Pose) -> Optional[float]:
        e, valid, _ = reprojection_errors(state, self.X, self.uv, self.cam)
        if not valid.all():
            return None
        c, _ = self._robust(self.info * np.einsum("ni,ni->n", e, e))
        return float(c.sum())

    def linearize(self, state: SE3Pose) -> Optional[Linearization]:
        e, valid, J = reprojection_errors(state, self.X, self.uv, self.cam, jacobians=True)
        if not valid.all():
            return None
        c, irls = self._robust(self.info * np.einsum("ni,ni->n", e, e))
        W = self.info * irls
        H = np.einsum("nki,n,nkj->ij", J, W, J)
        g = np.einsum("nki,n,nk->i", J, W, e)
        return Linearization(float(c.sum()), H, g)

    def retract(self, state: SE3Pose, delta: np.ndarray) -> SE3Pose:
        return state.retract(delta)


@dataclass
class MotionOnlyResult:
    pose: SE3Pose
    inliers: np.ndarray
    chi2: np.ndarray
    status: str

    @property
    def n_in(self) -> int:
        return int(np.count_nonzero(self.inliers))


def refine_motion_only(
    pose: SE3Pose,
    X: np.ndarray,
    uv: np.ndarray,
    octaves: np.ndarray,
    cam: PinholeCamera,
    rounds: int = 4,
    chi2_gate: float = CHI2_2DOF_95,
    max_iterations: int = 10,
) -> MotionOnlyResult:
    """Huber-robust LM on the current inliers, reclassifying every match after each round.

    The returned inlier set is the chi-square gate evaluated at the returned pose.
    """
    X = np.asarray(X, dtype=np.float64).reshape(-1, 3)
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    octaves = np.asarray(octaves)
    chi2 = chi2_values(pose, X, uv, octaves, cam)
    if not np.isfinite(chi2).any():
        return MotionOnlyResult(pose, np.zeros(X.shape[0], dtype=bool), chi2, "no-valid-points")
    inliers = chi2 <= chi2_gate
    status = "converged"
    for round_idx in range(rounds):
        active = inliers if np.count_nonzero(inliers) >= 3 else np.isfinite(chi2)
        problem = MotionOnlyProblem(X[active], uv[active], octaves[active], cam, np.sqrt(chi2_gate))
        result = levenberg_marquardt(problem, pose, max_iterations=max_iterations)
        if not result.success:
            status = "non-finite"
            break
        pose = result.state
        chi2 = chi2_values(pose, X, uv, octaves, cam)
        new_inliers = chi2 <= chi2_gate
        logger.debug("Motion-only round %d: %d inliers", round_idx, int(new_inliers.sum()))
        if np.array_equal(new_inliers, inliers) and round_idx > 0:
            inliers = new_inliers
            break
        inliers = new_inliers
    return MotionOnlyResult(pose, inliers, chi2, status)


def refine_least_squares(pose: SE3Pose, X: np.ndarray, uv: np.ndarray, cam: PinholeCamera, max_iterations: int = 20) -> SE3Pose:
    """Plain (non-robust, unit-weight) Gauss-Newton polish of a pose."""
    problem = MotionOnlyProblem(X, uv, np.zeros(len(X)), cam)
    result = levenberg_marquardt(problem, pose, max_iterations=max_iterations, rel_tol=1e-12)
    return result.state if result.success else pose
