"""EPnP inside RANSAC for a rough query pose.

Control points come from the principal axes of the 3D points; coplanar point sets use
three control points instead of four.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose
from surfelreloc.optim.reprojection import reprojection_errors, refine_least_squares

from .ransac import draw_sample, required_iterations

logger = logging.getLogger(__name__)

MIN_POINTS = 4
OCTAVE_SCALE = 1.2
PLANAR_RATIO = 1e-8
GAUSS_NEWTON_STEPS = 10


def _control_points(X: np.ndarray):
    """Centroid plus principal axes scaled by their spread; None for collinear points."""
    c0 = X.mean(axis=0)
    centered = X - c0
    evals, evecs = np.linalg.eigh(centered.T @ centered / X.shape[0])
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if evals[0] <= 0.0 or evals[1] <= PLANAR_RATIO * evals[0]:
        return None
    axes = 3 if evals[2] > PLANAR_RATIO * evals[0] else 2
    scales = np.sqrt(evals[:axes])
    ctrl = np.vstack([c0, c0 + (evecs[:, :axes] * scales).T])
    alphas = np.empty((X.shape[0], axes + 1))
    alphas[:, 1:] = (centered @ evecs[:, :axes]) / scales
    alphas[:, 0] = 1.0 - alphas[:, 1:].sum(axis=1)
    return ctrl, alphas


def _kabsch(P_world: np.ndarray, P_cam: np.ndarray):
    """R, t with ``P_cam ~= R P_world + t``."""
    cw, cc = P_world.mean(axis=0), P_cam.mean(axis=0)
    H = (P_world - cw).T @ (P_cam - cc)
    u, _, vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(vt.T @ u.T))])
    R = vt.T @ D @ u.T
    return R, cc - R @ cw


class _BetaSystem:
    """Distance constraints between control points expressed in kernel coefficients."""

    def __init__(self, kernel: np.ndarray, ctrl: np.ndarray):
        c = ctrl.shape[0]
        self.kernel = kernel  # (N, c, 3)
        self.pairs = list(combinations(range(c), 2))
        self.rho = np.array([np.sum((ctrl[i] - ctrl[j]) ** 2) for i, j in self.pairs])
        self.dv = np.stack([kernel[:, i] - kernel[:, j] for i, j in self.pairs], axis=1)  # (N, P, 3)

    def linear_system(self, n: int):
        """Rows over monomials ``b_a b_b`` (a <= b) of the first ``n`` kernel vectors."""
        terms = [(a, b) for a in range(n) for b in range(a, n)]
        L = np.column_stack(
            [(1.0 if a == b else 2.0) * np.einsum("pi,pi->p", self.dv[a], self.dv[b]) for a, b in terms]
        )
        return L, terms

    def approximate(self, n: int) -> Optional[np.ndarray]:
        L, terms = self.linear_system(n)
        if L.shape[1] > L.shape[0]:
            return None
        b, *_ = np.linalg.lstsq(L, self.rho, rcond=None)
        prod = dict(zip(terms, b))
        betas = np.zeros(self.kernel.shape[0])
        betas[0] = np.sqrt(abs(prod[(0, 0)]))
        for k in range(1, n):
            betas[k] = np.sign(prod[(0, k)]) * np.sqrt(abs(prod[(k, k)]))
        return betas

    def refine(self, betas: np.ndarray) -> np.ndarray:
        for _ in range(GAUSS_NEWTON_STEPS):
            d = np.einsum("k,kpi->pi", betas, self.dv)
            r = np.einsum("pi,pi->p", d, d) - self.rho
            J = 2.0 * np.einsum("pi,kpi->pk", d, self.dv)
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
            betas = betas + step
            if np.linalg.norm(step) < 1e-14 * max(1.0, np.linalg.norm(betas)):
                break
        return betas


def epnp(X: np.ndarray, uv: np.ndarray, cam: PinholeCamera) -> Optional[SE3Pose]:
    """World-from-camera pose from n >= 4 correspondences; None on degenerate input."""
    X = np.asarray(X, dtype=np.float64).reshape(-1, 3)
    if X.shape[0] < MIN_POINTS:
        return None
    cp = _control_points(X)
    if cp is None:
        return None
    ctrl, alphas = cp
    c = ctrl.shape[0]
    f = cam.lift_points(uv)
    M = np.zeros((2 * X.shape[0], 3 * c))
    M[0::2, 0::3] = alphas
    M[0::2, 2::3] = -alphas * f[:, 0:1]
    M[1::2, 1::3] = alphas
    M[1::2, 2::3] = -alphas * f[:, 1:2]
    _, evecs = np.linalg.eigh(M.T @ M)
    n_kernel = min(c, 4)
    kernel = evecs[:, :n_kernel].T.reshape(n_kernel, c, 3)
    system = _BetaSystem(kernel, ctrl)

    best, best_err = None, np.inf
    for n in range(1, n_kernel):
        betas = system.approximate(n)
        if betas is None or not np.all(np.isfinite(betas)):
            continue
        betas = system.refine(betas)
        pose = _pose_from_betas(betas, kernel, alphas, X)
        if pose is None:
            continue
        e, valid, _ = reprojection_errors(pose, X, uv, cam)
        err = float(np.mean(np.einsum("ni,ni->n", e, e))) if valid.all() else np.inf
        if err < best_err:
            best, best_err = pose, err
    return best


def _pose_from_betas(betas, kernel, alphas, X) -> Optional[SE3Pose]:
    ctrl_cam = np.einsum("k,kci->ci", betas, kernel)
    P_cam = alphas @ ctrl_cam
    if P_cam[:, 2].mean() < 0.0:
        P_cam = -P_cam
    if not np.all(np.isfinite(P_cam)):
        return None
    R, t = _kabsch(X, P_cam)
    return SE3Pose.from_matrix(R.T, -R.T @ t)


@dataclass
class PnPResult:
    pose: Optional[SE3Pose]
    inliers: np.ndarray
    iterations: int
    status: str

    @property
    def n_in(self) -> int:
        return int(np.count_nonzero(self.inliers))


def inlier_mask(pose: SE3Pose, X, uv, octaves, cam: PinholeCamera, threshold: float) -> np.ndarray:
    e, valid, _ = reprojection_errors(pose, X, uv, cam)
    gate = threshold * np.power(OCTAVE_SCALE, np.asarray(octaves, dtype=np.float64))
    err = np.where(valid, np.linalg.norm(np.where(valid[:, None], e, 0.0), axis=1), np.inf)
    return err < gate


def pnp_ransac(
    X: np.ndarray,
    uv: np.ndarray,
    octaves: np.ndarray,
    cam: PinholeCamera,
    rng: np.random.Generator,
    threshold: float = 5.0,
    iterations: int = 300,
    confidence: float = 0.99,
) -> PnPResult:
    """Rough pose from 2D-3D matches; the winning model is refit on all of its inliers."""
    X = np.asarray(X, dtype=np.float64).reshape(-1, 3)
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    n = X.shape[0]
    if n < MIN_POINTS:
        return PnPResult(None, np.zeros(n, dtype=bool), 0, "too-few-matches")

    best_mask: Optional[np.ndarray] = None
    best_count = 0
    needed, it = iterations, 0
    while it < needed:
        it += 1
        sample = draw_sample(rng, n, MIN_POINTS)
        pose = epnp(X[sample], uv[sample], cam)
        if pose is None:
            continue
        mask = inlier_mask(pose, X, uv, octaves, cam, threshold)
        count = int(mask.sum())
        if count > best_count:
            best_mask, best_count = mask, count
            needed = required_iterations(count / n, MIN_POINTS, confidence, iterations)
    if best_mask is None or best_count < MIN_POINTS:
        logger.debug("PnP RANSAC found no model with %d inliers in %d iterations", MIN_POINTS, it)
        return PnPResult(None, np.zeros(n, dtype=bool), it, "no-model")

    pose = epnp(X[best_mask], uv[best_mask], cam)
    if pose is None:
        return PnPResult(None, np.zeros(n, dtype=bool), it, "no-model")
    pose = refine_least_squares(pose, X[best_mask], uv[best_mask], cam)
    mask = inlier_mask(pose, X, uv, octaves, cam, threshold)
    if mask.sum() < MIN_POINTS:
        return PnPResult(None, np.zeros(n, dtype=bool), it, "no-model")
    logger.debug("PnP RANSAC: %d/%d inliers after %d iterations", int(mask.sum()), n, it)
    return PnPResult(pose, mask, it, "ok")
