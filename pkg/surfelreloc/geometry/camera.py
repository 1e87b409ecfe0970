"""Distortion-free pinhole camera: projection Π, unprojection Π⁻¹ and unit-plane lift."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np


class Pixel(NamedTuple):
    u: float
    v: float


@dataclass(frozen=True)
class PinholeCamera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"Image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"Principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def project(self, x: np.ndarray) -> Optional[Pixel]:
        """Π(x) for a camera-frame point; ``None`` when the depth is not positive."""
        X, Y, Z = (float(c) for c in x)
        if not Z > 0.0:
            return None
        return Pixel(self.fx * X / Z + self.cx, self.fy * Y / Z + self.cy)

    def unproject(self, p: Pixel, rho: float) -> Optional[np.ndarray]:
        """Π⁻¹(p, rho); ``None`` when the inverse depth is not positive."""
        if not rho > 0.0:
            return None
        return self.lift_unit_plane(p) / rho

    def lift_unit_plane(self, p: Pixel) -> np.ndarray:
        u, v = p
        return np.array([(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0])

    def project_points(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Vectorised Π for (N, 3) camera-frame points.

        Returns:
            (uv, valid) where ``valid`` marks points with positive depth; ``uv`` rows of
            invalid points are NaN.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        z = X[:, 2]
        valid = z > 0.0
        uv = np.full((X.shape[0], 2), np.nan)
        zv = z[valid]
        uv[valid, 0] = self.fx * X[valid, 0] / zv + self.cx
        uv[valid, 1] = self.fy * X[valid, 1] / zv + self.cy
        return uv, valid

    def lift_points(self, uv: np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
        out = np.ones((uv.shape[0], 3))
        out[:, 0] = (uv[:, 0] - self.cx) / self.fx
        out[:, 1] = (uv[:, 1] - self.cy) / self.fy
        return out

    def in_image(self, uv: np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(uv)
        return (
            np.isfinite(uv).all(axis=1)
            & (uv[:, 0] >= 0.0)
            & (uv[:, 0] <= self.width - 1)
            & (uv[:, 1] >= 0.0)
            & (uv[:, 1] <= self.height - 1)
        )

    def projection_jacobian(self, X: np.ndarray) -> np.ndarray:
        """d Π / d x for (N, 3) camera-frame points, shape (N, 2, 3)."""
        X = np.atleast_2d(X)
        inv_z = 1.0 / X[:, 2]
        J = np.zeros((X.shape[0], 2, 3))
        J[:, 0, 0] = self.fx * inv_z
        J[:, 0, 2] = -self.fx * X[:, 0] * inv_z * inv_z
        J[:, 1, 1] = self.fy * inv_z
        J[:, 1, 2] = -self.fy * X[:, 1] * inv_z * inv_z
        return J

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }
