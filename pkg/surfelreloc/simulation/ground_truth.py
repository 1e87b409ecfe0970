"""Ground-truth sidecar of a simulated sequence and its ``GTRU`` binary layout.

Sections: ``META`` (JSON), ``FRMS`` (per frame timestamp, pose, place label and the
observed landmark ids), ``LMKS`` (landmark positions, plane ids, surfel ids,
descriptors) and ``PLNS`` (plane coefficients ``n, d``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from surfelreloc.dataflows.binary_io import ByteReader, ByteWriter, pack_sections, require_sections, unpack_sections
from surfelreloc.dataflows.utils import write_bytes_atomic
from surfelreloc.geometry.se3 import SE3Pose

from .scenes import Scene

MAGIC = b"GTRU"
VERSION = 1
PLACE_CELL = 1.0  # m


class GroundTruthFormatError(ValueError):
    pass


def place_label(scene: Scene, position: np.ndarray) -> int:
    """Room index in the twin-room world, otherwise the 1 m floor cell."""
    if scene.spec.kind == "twin_rooms":
        return scene.room_of(position)
    ix, iy = (int(np.floor(c / PLACE_CELL)) for c in position[:2])
    return ix * 1000 + iy


@dataclass
class GroundTruth:
    timestamps: np.ndarray
    poses: List[SE3Pose]
    landmark_ids: List[np.ndarray]  # per frame, per keypoint
    place_labels: np.ndarray
    landmark_positions: np.ndarray
    landmark_planes: np.ndarray
    landmark_surfels: np.ndarray
    landmark_descriptors: np.ndarray
    planes: np.ndarray  # (P, 4)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    def pose_at(self, timestamp: float, tolerance: float = 1e-6) -> SE3Pose:
        i = int(np.argmin(np.abs(self.timestamps - timestamp)))
        if abs(self.timestamps[i] - timestamp) > tolerance:
            raise KeyError(f"No ground-truth frame at t={timestamp}")
        return self.poses[i]

    @classmethod
    def from_sequence(cls, scene: Scene, timestamps: Sequence[float], poses: Sequence[SE3Pose], observations, meta=None):
        lm = scene.landmarks
        return cls(
            np.asarray(timestamps, dtype=np.float64),
            list(poses),
            [o.landmark_ids for o in observations],
            np.array([place_label(scene, p.translation) for p in poses], dtype=np.int64),
            lm.positions,
            lm.plane_ids,
            lm.surfel_ids,
            lm.descriptors,
            scene.plane_coefficients(),
            dict(meta or {}),
        )


def encode_ground_truth(gt: GroundTruth) -> bytes:
    frames = ByteWriter()
    frames.pack("Q", len(gt))
    for t, pose, label, ids in zip(gt.timestamps, gt.poses, gt.place_labels, gt.landmark_ids):
        frames.pack("d", float(t))
        frames.array(pose.to_vector(), "f8")
        frames.pack("qQ", int(label), len(ids))
        frames.array(ids, "i8")
    lms = ByteWriter()
    lms.pack("Q", gt.landmark_positions.shape[0])
    lms.array(gt.landmark_positions, "f8")
    lms.array(gt.landmark_planes, "i8")
    lms.array(gt.landmark_surfels, "i8")
    lms.array(gt.landmark_descriptors, "u1")
    planes = ByteWriter()
    planes.pack("Q", gt.planes.shape[0])
    planes.array(gt.planes, "f8")
    meta = json.dumps(gt.meta, sort_keys=True).encode("utf-8")
    return pack_sections(
        MAGIC,
        VERSION,
        [(b"META", meta), (b"FRMS", frames.getvalue()), (b"LMKS", lms.getvalue()), (b"PLNS", planes.getvalue())],
    )


def decode_ground_truth(data: bytes) -> GroundTruth:
    sections = unpack_sections(data, MAGIC, VERSION, GroundTruthFormatError)
    require_sections(sections, (b"META", b"FRMS", b"LMKS", b"PLNS"), GroundTruthFormatError)
    try:
        meta = json.loads(sections[b"META"].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise GroundTruthFormatError(f"Invalid META section: {exc}") from exc

    r = ByteReader(sections[b"FRMS"], GroundTruthFormatError, "FRMS section")
    timestamps, poses, labels, ids = [], [], [], []
    for _ in range(r.scalar("Q")):
        timestamps.append(r.scalar("d"))
        poses.append(SE3Pose.from_vector(r.array(7, "f8")))
        label, n = r.unpack("qQ")
        labels.append(label)
        ids.append(r.array(n, "i8"))
    r.expect_end()

    r = ByteReader(sections[b"LMKS"], GroundTruthFormatError, "LMKS section")
    n = r.scalar("Q")
    positions = r.array(3 * n, "f8", (n, 3))
    planes_of = r.array(n, "i8")
    surfels = r.array(n, "i8")
    descriptors = r.array(32 * n, "u1", (n, 32))
    r.expect_end()

    r = ByteReader(sections[b"PLNS"], GroundTruthFormatError, "PLNS section")
    p = r.scalar("Q")
    planes = r.array(4 * p, "f8", (p, 4))
    r.expect_end()

    for frame_ids in ids:
        if frame_ids.size and (frame_ids.min() < 0 or frame_ids.max() >= n):
            raise GroundTruthFormatError("Observation references an unknown landmark")
    return GroundTruth(
        np.asarray(timestamps, dtype=np.float64),
        poses,
        ids,
        np.asarray(labels, dtype=np.int64),
        positions,
        planes_of,
        surfels,
        descriptors,
        planes,
        meta,
    )


def save_ground_truth(path: Union[str, Path], gt: GroundTruth) -> None:
    write_bytes_atomic(path, encode_ground_truth(gt))


def load_ground_truth(path: Union[str, Path]) -> GroundTruth:
    return decode_ground_truth(Path(path).read_bytes())
