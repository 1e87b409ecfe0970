"""Epipolar gating of 2D-3D matches between the canonical keyframe and the query."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from surfelreloc.geometry.camera import PinholeCamera

from .candidates import Correspondences
from .ransac import draw_sample, required_iterations

logger = logging.getLogger(__name__)

MIN_MATCHES = 8


@dataclass
class EssentialCheck:
    keep: np.ndarray  # (M,) bool over the input correspondences
    flag: Optional[str] = None  # set when the check was skipped
    E: Optional[np.ndarray] = None

    @property
    def kept(self) -> int:
        return int(np.count_nonzero(self.keep))


def _hartley(x: np.ndarray):
    """Similarity taking 2D points to zero mean and mean distance sqrt(2)."""
    c = x.mean(axis=0)
    dist = np.linalg.norm(x - c, axis=1).mean()
    s = np.sqrt(2.0) / dist if dist > 1e-15 else 1.0
    T = np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])
    return T


def eight_point(x_query: np.ndarray, x_ref: np.ndarray) -> Optional[np.ndarray]:
    """Essential matrix with ``x_query^T E x_ref = 0`` from >= 8 unit-plane correspondences."""
    Tq, Tr = _hartley(x_query[:, :2]), _hartley(x_ref[:, :2])
    q = x_query @ Tq.T
    r = x_ref @ Tr.T
    A = np.einsum("ni,nj->nij", q, r).reshape(-1, 9)
    try:
        _, _, vt = np.linalg.svd(A)
    except np.linalg.LinAlgError:
        return None
    F = vt[-1].reshape(3, 3)
    E = Tq.T @ F @ Tr
    u, s, vt = np.linalg.svd(E)
    sigma = 0.5 * (s[0] + s[1])
    E = u @ np.diag([sigma, sigma, 0.0]) @ vt
    norm = np.linalg.norm(E)
    if not np.isfinite(norm) or norm < 1e-15:
        return None
    return E / norm


def sampson_distances(E: np.ndarray, x_query: np.ndarray, x_ref: np.ndarray) -> np.ndarray:
    Ex = x_ref @ E.T
    Etx = x_query @ E
    num = np.einsum("ni,ni->n", x_query, Ex) ** 2
    den = Ex[:, 0] ** 2 + Ex[:, 1] ** 2 + Etx[:, 0] ** 2 + Etx[:, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(den > 0.0, num / den, 0.0)
    return d


def reference_pixels(db, canonical: int, corr: Correspondences):
    """Pixel of each matched point in the canonical keyframe.

    The observed keypoint is used when the canonical keyframe sees the point, otherwise
    the point's projection, which may fall outside the image. Returns pixels and a mask
    of points with positive depth.
    """
    kf = db.keyframes[canonical]
    uv = np.empty((len(corr), 2))
    valid = np.ones(len(corr), dtype=bool)
    y = kf.pose.inverse_transform(corr.X)
    proj, in_front = db.camera.project_points(y)
    for i, pid in enumerate(corr.point_ids.tolist()):
        idx = db.points[pid].observations.get(canonical)
        if idx is not None:
            uv[i] = kf.features.uv[idx]
        else:
            uv[i] = proj[i]
            valid[i] = bool(in_front[i])
    return uv, valid


def essential_check(
    db,
    canonical: int,
    corr: Correspondences,
    threshold: float,
    iterations: int,
    confidence: float,
    rng: np.random.Generator,
) -> EssentialCheck:
    """RANSAC over the normalized 8-point solver; matches pass when their Sampson
    distance is below ``(threshold / f)^2`` in unit-plane coordinates."""
    n = len(corr)
    if n < MIN_MATCHES:
        return EssentialCheck(np.ones(n, dtype=bool), flag="too-few-matches")
    cam: PinholeCamera = db.camera
    ref_uv, valid = reference_pixels(db, canonical, corr)
    idx = np.flatnonzero(valid)
    if idx.size < MIN_MATCHES:
        return EssentialCheck(valid.copy(), flag="too-few-matches")
    x_q = cam.lift_points(corr.uv[idx])
    x_r = cam.lift_points(ref_uv[idx])
    gate = (threshold / (0.5 * (cam.fx + cam.fy))) ** 2

    best_mask, best_E, best_count = None, None, -1
    needed = iterations
    it = 0
    while it < needed:
        sample = draw_sample(rng, idx.size, MIN_MATCHES)
        it += 1
        E = eight_point(x_q[sample], x_r[sample])
        if E is None:
            continue
        mask = sampson_distances(E, x_q, x_r) < gate
        count = int(mask.sum())
        if count > best_count:
            best_mask, best_E, best_count = mask, E, count
            needed = required_iterations(count / idx.size, MIN_MATCHES, confidence, iterations)
    if best_mask is None:
        logger.debug("Essential check failed to produce a model, passing matches through")
        return EssentialCheck(valid.copy(), flag="estimation-failed")

    keep = np.zeros(n, dtype=bool)
    keep[idx[best_mask]] = True
    logger.debug("Essential check kept %d of %d matches after %d iterations", best_count, n, it)
    return EssentialCheck(keep, E=best_E)
