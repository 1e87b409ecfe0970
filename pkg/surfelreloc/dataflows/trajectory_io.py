"""Trajectory text files: one ``timestamp tx ty tz qx qy qz qw`` pose per line, ``#`` comments."""

from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from surfelreloc.geometry.se3 import SE3Pose

COLUMNS = ["timestamp", "tx", "ty", "tz", "qx", "qy", "qz", "qw"]


class TrajectoryError(ValueError):
    """Raised for malformed trajectory files or trajectories leaving the scene."""


def trajectory_frame(timestamps: Sequence[float], poses: Sequence[SE3Pose]) -> pd.DataFrame:
    if len(timestamps) != len(poses):
        raise TrajectoryError(f"{len(timestamps)} timestamps for {len(poses)} poses")
    rows = np.column_stack(
        [np.asarray(timestamps, dtype=np.float64), np.array([p.to_vector() for p in poses]).reshape(-1, 7)]
    )
    return pd.DataFrame(rows, columns=COLUMNS)


def write_trajectory(path: Union[str, Path], timestamps: Sequence[float], poses: Sequence[SE3Pose]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = trajectory_frame(timestamps, poses)
    with open(path, "w") as f:
        f.write("# " + " ".join(COLUMNS) + "\n")
        frame.to_csv(f, sep=" ", header=False, index=False, float_format="%.17g")


def read_trajectory(path: Union[str, Path]) -> Tuple[np.ndarray, List[SE3Pose]]:
    try:
        frame = pd.read_csv(path, sep=r"\s+", comment="#", header=None, dtype=np.float64)
    except pd.errors.EmptyDataError:
        return np.zeros(0), []
    except ValueError as exc:
        raise TrajectoryError(f"{path}: non-numeric trajectory entry ({exc})") from exc
    if frame.shape[1] != len(COLUMNS):
        raise TrajectoryError(f"{path}: expected {len(COLUMNS)} columns, found {frame.shape[1]}")
    values = frame.to_numpy()
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values).all(axis=1))[0])
        raise TrajectoryError(f"{path}: non-finite value in pose record {bad}")
    try:
        poses = [SE3Pose.from_vector(row[1:]) for row in values]
    except ValueError as exc:
        raise TrajectoryError(f"{path}: {exc}") from exc
    return values[:, 0].copy(), poses
