"""Rigid-body poses on SE(3).

Poses are world-from-frame transforms stored as a unit quaternion (x, y, z, w)
plus a translation. Tangent vectors are ordered ``(rho, phi)``: the translational
part first, the rotational part second. Optimizers perturb poses on the right,
``pose.retract(delta) == pose.compose(SE3Pose.exp(delta))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.transform import Rotation

_SMALL_ANGLE = 1e-5


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix, ``skew(a) @ b == np.cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def batch_skew(v: np.ndarray) -> np.ndarray:
    """Stack of cross-product matrices for an (N, 3) array."""
    out = np.zeros((v.shape[0], 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def so3_left_jacobian(phi: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < _SMALL_ANGLE:
        return np.eye(3) + 0.5 * K + K @ K / 6.0
    theta2 = theta * theta
    return (
        np.eye(3)
        + (1.0 - np.cos(theta)) / theta2 * K
        + (theta - np.sin(theta)) / (theta2 * theta) * K @ K
    )


def so3_left_jacobian_inv(phi: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < _SMALL_ANGLE:
        return np.eye(3) - 0.5 * K + K @ K / 12.0
    coeff = (1.0 - theta * np.sin(theta) / (2.0 * (1.0 - np.cos(theta)))) / (theta * theta)
    return np.eye(3) - 0.5 * K + coeff * K @ K


def _quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    )


@dataclass(frozen=True, eq=False)
class SE3Pose:
    """World-from-frame rigid transform.

    Args:
        rotation: quaternion (x, y, z, w); renormalized on construction
        translation: frame origin in world coordinates (meters)
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.rotation, dtype=np.float64).reshape(4)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        norm = float(np.linalg.norm(q))
        if not np.isfinite(norm) or norm < 1e-12:
            raise ValueError(f"Invalid rotation quaternion: {self.rotation!r}")
        if not np.all(np.isfinite(t)):
            raise ValueError(f"Invalid translation: {self.translation!r}")
        if abs(norm - 1.0) > 1e-12:
            q = q / norm
        if q[3] < 0.0:
            q = -q
        q.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "SE3Pose":
        return cls(np.array([0.0, 0.0, 0.0, 1.0]), np.zeros(3))

    @classmethod
    def from_matrix(cls, R: np.ndarray, t: np.ndarray) -> "SE3Pose":
        return cls(Rotation.from_matrix(R).as_quat(), t)

    @classmethod
    def exp(cls, xi: np.ndarray) -> "SE3Pose":
        xi = np.asarray(xi, dtype=np.float64).reshape(6)
        rho, phi = xi[:3], xi[3:]
        return cls(Rotation.from_rotvec(phi).as_quat(), so3_left_jacobian(phi) @ rho)

    def log(self) -> np.ndarray:
        """Tangent vector ``(rho, phi)``; defined for rotation angles below pi."""
        phi = Rotation.from_quat(self.rotation).as_rotvec()
        rho = so3_left_jacobian_inv(phi) @ self.translation
        return np.concatenate([rho, phi])

    @cached_property
    def R(self) -> np.ndarray:
        R = Rotation.from_quat(self.rotation).as_matrix()
        R.flags.writeable = False
        return R

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.translation
        return T

    def compose(self, other: "SE3Pose") -> "SE3Pose":
        q = _quat_multiply(self.rotation, other.rotation)
        return SE3Pose(q, self.R @ other.translation + self.translation)

    def inverse(self) -> "SE3Pose":
        q = self.rotation * np.array([-1.0, -1.0, -1.0, 1.0])
        return SE3Pose(q, -(self.R.T @ self.translation))

    def retract(self, delta: np.ndarray) -> "SE3Pose":
        return self.compose(SE3Pose.exp(delta))

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map frame points (N, 3) or (3,) into the world frame."""
        return np.asarray(points) @ self.R.T + self.translation

    def inverse_transform(self, points: np.ndarray) -> np.ndarray:
        """Map world points (N, 3) or (3,) into this frame."""
        return (np.asarray(points) - self.translation) @ self.R

    def angle_to(self, other: "SE3Pose") -> float:
        """Rotation angle (rad) of ``self^-1 * other``."""
        q = _quat_multiply(self.rotation * np.array([-1.0, -1.0, -1.0, 1.0]), other.rotation)
        return float(2.0 * np.arctan2(np.linalg.norm(q[:3]), abs(q[3])))

    def distance_to(self, other: "SE3Pose") -> float:
        return float(np.linalg.norm(self.translation - other.translation))

    def is_close(self, other: "SE3Pose", atol: float = 1e-9) -> bool:
        return self.distance_to(other) <= atol and self.angle_to(other) <= atol

    def to_vector(self) -> np.ndarray:
        """``(tx, ty, tz, qx, qy, qz, qw)``, the trajectory-file column order."""
        return np.concatenate([self.translation, self.rotation])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "SE3Pose":
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[3:7], vec[:3])

    def __repr__(self) -> str:
        t = np.array2string(self.translation, precision=4)
        q = np.array2string(self.rotation, precision=4)
        return f"SE3Pose(t={t}, q={q})"


def look_at(eye: np.ndarray, target: np.ndarray, up: np.ndarray = np.array([0.0, 0.0, 1.0])) -> SE3Pose:
    """Camera pose at ``eye`` looking at ``target`` (z forward, x right, y down)."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return SE3Pose.from_matrix(np.column_stack([right, down, forward]), eye)
