"""Camera paths through a scene with horizontal look-at orientation."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np

from surfelreloc.dataflows.trajectory_io import TrajectoryError
from surfelreloc.geometry.se3 import SE3Pose, look_at

from .scenes import Scene

TRAJECTORY_KINDS = ("circle", "lawnmower", "two_lane")


@dataclass
class TrajectorySpec:
    kind: str = "circle"  # Options: circle, lawnmower, two_lane
    frames: int = 60
    loops: float = 1.0  # circle only
    radius: float = 0.5  # m, circle only
    center: Tuple[float, float] = (2.0, 2.0)  # m, circle only
    camera_height: float = 1.5  # m
    lane: int = 0  # two_lane only: 0 or 1
    lane_width: float = 3.0  # m, two_lane only
    row_spacing: float = 0.5  # m, lawnmower only
    margin: float = 0.25  # m, lawnmower and two_lane
    room: int = 0  # footprint index the path lives in
    phase: float = 0.0  # rad, circle start angle
    start_time: float = 0.0
    frame_interval: float = 0.1  # s

    def __post_init__(self) -> None:
        if self.kind not in TRAJECTORY_KINDS:
            raise ValueError(f"Unsupported trajectory kind: {self.kind}")
        if self.frames <= 0:
            raise ValueError(f"frames must be positive, got {self.frames}")
        if self.radius < 0 or self.lane_width <= 0 or self.row_spacing <= 0 or self.frame_interval <= 0:
            raise ValueError("radius must be non-negative; lane_width, row_spacing and frame_interval positive")
        if self.margin < 0:
            raise ValueError(f"margin must be non-negative, got {self.margin}")
        self.center = tuple(float(c) for c in self.center)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["center"] = list(self.center)
        return out


def _heading_pose(position: np.ndarray, heading: float) -> SE3Pose:
    direction = np.array([np.cos(heading), np.sin(heading), 0.0])
    return look_at(position, position + direction)


def circle(center, radius: float, height: float, frames: int, loops: float = 1.0, phase: float = 0.0) -> List[SE3Pose]:
    """Positions on a horizontal circle, each camera looking radially outward."""
    angles = phase + 2.0 * np.pi * loops * np.arange(frames) / frames
    cx, cy = center
    return [
        _heading_pose(np.array([cx + radius * np.cos(a), cy + radius * np.sin(a), height]), a) for a in angles
    ]


def _polyline_samples(vertices: np.ndarray, frames: int):
    seg = np.diff(vertices, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = np.linspace(0.0, cum[-1], frames) if frames > 1 else np.zeros(1)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = np.where(lengths[idx] > 0, (s - cum[idx]) / np.where(lengths[idx] > 0, lengths[idx], 1.0), 0.0)
    points = vertices[idx] + frac[:, None] * seg[idx]
    headings = np.arctan2(seg[idx, 1], seg[idx, 0])
    return points, headings


def lawnmower(footprint, height: float, frames: int, row_spacing: float = 0.5, margin: float = 0.25) -> List[SE3Pose]:
    """Boustrophedon rows along x, ``row_spacing`` apart, ``margin`` inside the footprint."""
    x0, x1, y0, y1 = footprint
    if x1 - x0 < 2 * margin or y1 - y0 < 2 * margin:
        raise TrajectoryError(
            f"Lawnmower footprint {tuple(footprint)} leaves no room inside a margin of {margin} m"
        )
    ys = np.arange(y0 + margin, y1 - margin + 1e-9, row_spacing)
    vertices = []
    for i, y in enumerate(ys):
        xs = (x0 + margin, x1 - margin) if i % 2 == 0 else (x1 - margin, x0 + margin)
        vertices += [(xs[0], y), (xs[1], y)]
    points, headings = _polyline_samples(np.asarray(vertices, dtype=np.float64), frames)
    return [_heading_pose(np.array([p[0], p[1], height]), h) for p, h in zip(points, headings)]


def two_lane(footprint, height: float, frames: int, lane: int, lane_width: float, margin: float = 0.25) -> List[SE3Pose]:
    """Straight drive along x on lane 0 (y = mid - w/2) or lane 1 (y = mid + w/2), looking ahead."""
    x0, x1, y0, y1 = footprint
    y = 0.5 * (y0 + y1) + (lane - 0.5) * lane_width
    xs = np.linspace(x0 + margin, x1 - margin, frames)
    return [_heading_pose(np.array([x, y, height]), 0.0) for x in xs]


def generate_trajectory(scene: Scene, spec: TrajectorySpec) -> Tuple[np.ndarray, List[SE3Pose]]:
    """Timestamps and poses for ``spec``; raises TrajectoryError when a position leaves the scene."""
    footprint = scene.rooms[spec.room]
    if spec.kind == "circle":
        poses = circle(spec.center, spec.radius, spec.camera_height, spec.frames, spec.loops, spec.phase)
    elif spec.kind == "lawnmower":
        poses = lawnmower(footprint, spec.camera_height, spec.frames, spec.row_spacing, spec.margin)
    else:
        poses = two_lane(footprint, spec.camera_height, spec.frames, spec.lane, spec.lane_width, spec.margin)
    for i, pose in enumerate(poses):
        if not scene.contains(pose.translation):
            raise TrajectoryError(f"Trajectory leaves the scene at frame {i}: {pose.translation.tolist()}")
    timestamps = spec.start_time + spec.frame_interval * np.arange(spec.frames)
    return timestamps, poses
