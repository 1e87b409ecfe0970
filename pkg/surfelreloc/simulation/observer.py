"""Synthetic feature extraction: which landmarks a camera sees and how they look."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from surfelreloc.descriptors.binary import flip_bits
from surfelreloc.descriptors.features import FrameFeatures
from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose

from .noise import NoiseSpec
from .scenes import Scene, occluded

MAX_OBSERVATIONS = 1000
OCTAVE_DEPTHS = (2.0, 4.0)  # m, upper bounds of octaves 0 and 1
BASE_KEYPOINT_SIZE = 4.0  # px at octave 0
OCTAVE_SCALE = 1.2

DATABASE_STREAM = 0
QUERY_STREAM = 1


def octave_for_depth(depth: np.ndarray) -> np.ndarray:
    return np.searchsorted(np.asarray(OCTAVE_DEPTHS), np.asarray(depth), side="left").astype(np.int32)


@dataclass
class Observation:
    features: FrameFeatures
    landmark_ids: np.ndarray  # per keypoint


def visible_landmarks(scene: Scene, pose: SE3Pose, cam: PinholeCamera):
    """Landmark ids in view (in front, inside the image, front-facing, unoccluded), nearest first."""
    lm = scene.landmarks
    y = pose.inverse_transform(lm.positions)
    uv, valid = cam.project_points(y)
    valid &= cam.in_image(uv)
    normals = np.array([scene.planes[p].normal for p in lm.plane_ids], dtype=np.float64).reshape(-1, 3)
    valid &= np.einsum("ni,ni->n", normals, pose.translation - lm.positions) > 0.0
    ids = np.flatnonzero(valid)
    if ids.size:
        ids = ids[~occluded(scene, pose.translation, lm.positions[ids], lm.plane_ids[ids])]
    order = np.lexsort((ids, y[ids, 2]))
    return ids[order], uv[ids[order]], y[ids[order], 2]


def observe(
    scene: Scene,
    pose: SE3Pose,
    cam: PinholeCamera,
    noise: NoiseSpec,
    timestamp: float = 0.0,
    rng: np.random.Generator = None,
) -> Observation:
    """Keypoints of the visible landmarks with pixel, descriptor and outlier noise."""
    rng = rng if rng is not None else np.random.default_rng(0)
    ids, uv, depth = visible_landmarks(scene, pose, cam)
    ids, uv, depth = ids[:MAX_OBSERVATIONS], uv[:MAX_OBSERVATIONS], depth[:MAX_OBSERVATIONS]
    n = ids.size
    if noise.pixel_sigma > 0 and n:
        uv = uv + rng.normal(0.0, noise.pixel_sigma, size=uv.shape)
        uv[:, 0] = np.clip(uv[:, 0], 0.0, cam.width - 1)
        uv[:, 1] = np.clip(uv[:, 1], 0.0, cam.height - 1)
    octaves = octave_for_depth(depth)
    sizes = BASE_KEYPOINT_SIZE * np.power(OCTAVE_SCALE, octaves.astype(np.float64))

    source = ids.copy()
    if noise.outlier_fraction > 0 and n:
        swap = rng.random(n) < noise.outlier_fraction
        source[swap] = rng.integers(0, len(scene.landmarks), int(swap.sum()))
    descriptors = scene.landmarks.descriptors[source].copy()
    if noise.bit_flips:
        descriptors = np.vstack([flip_bits(d, noise.bit_flips, rng) for d in descriptors]) if n else descriptors
    features = FrameFeatures(
        uv.reshape(-1, 2).astype(np.float64),
        sizes,
        octaves,
        descriptors.reshape(-1, descriptors.shape[-1]),
        timestamp=float(timestamp),
    )
    return Observation(features, ids.astype(np.int64))


def observe_sequence(
    scene: Scene,
    timestamps: Sequence[float],
    poses: Sequence[SE3Pose],
    cam: PinholeCamera,
    noise: NoiseSpec,
    seed: int,
    stream: int,
) -> List[Observation]:
    """One observation per pose, each drawn from ``default_rng([seed, stream, frame])``."""
    return [
        observe(scene, pose, cam, noise, t, np.random.default_rng([seed, stream, i]))
        for i, (t, pose) in enumerate(zip(timestamps, poses))
    ]
