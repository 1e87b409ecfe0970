"""Per-frame feature containers shared by the database, the relocalizer and the simulator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from surfelreloc.geometry.camera import Pixel

DESCRIPTOR_BYTES = 32  # 256-bit binary descriptors


@dataclass(frozen=True)
class Keypoint:
    position: Pixel
    size: float
    octave: int

    def __post_init__(self) -> None:
        if not self.size > 0:
            raise ValueError(f"Keypoint size must be positive, got {self.size}")
        if self.octave < 0:
            raise ValueError(f"Keypoint octave must be >= 0, got {self.octave}")


@dataclass
class FrameFeatures:
    """Keypoints and their binary descriptors for one image.

    Keypoints are kept column-wise: ``uv`` (N, 2) pixel positions, ``sizes`` (N,) scale
    radii in pixels and ``octaves`` (N,) pyramid levels. ``descriptors`` is an (N, 32)
    uint8 array. ``global_descriptor`` is filled in lazily by the database once a
    vocabulary is known.
    """

    uv: np.ndarray
    sizes: np.ndarray
    octaves: np.ndarray
    descriptors: np.ndarray
    timestamp: float = 0.0
    global_descriptor: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.uv = np.asarray(self.uv, dtype=np.float64).reshape(-1, 2)
        self.sizes = np.asarray(self.sizes, dtype=np.float64).reshape(-1)
        self.octaves = np.asarray(self.octaves, dtype=np.int32).reshape(-1)
        self.descriptors = as_descriptor_array(self.descriptors)
        n = self.uv.shape[0]
        if not (self.sizes.shape[0] == self.octaves.shape[0] == self.descriptors.shape[0] == n):
            raise ValueError(
                "Keypoints and descriptors must have equal length: "
                f"uv={n}, sizes={self.sizes.shape[0]}, octaves={self.octaves.shape[0]}, "
                f"descriptors={self.descriptors.shape[0]}"
            )
        if n and (not np.all(self.sizes > 0) or np.any(self.octaves < 0)):
            raise ValueError("Keypoint sizes must be positive and octaves non-negative")
        if not np.all(np.isfinite(self.uv)):
            raise ValueError("Keypoint positions must be finite")

    def __len__(self) -> int:
        return self.uv.shape[0]

    def keypoint(self, i: int) -> Keypoint:
        return Keypoint(Pixel(*self.uv[i]), float(self.sizes[i]), int(self.octaves[i]))

    @property
    def scale_factors(self) -> np.ndarray:
        return np.power(1.2, self.octaves)

    def subset(self, indices: Sequence[int]) -> "FrameFeatures":
        idx = np.asarray(indices, dtype=np.int64)
        return FrameFeatures(
            self.uv[idx], self.sizes[idx], self.octaves[idx], self.descriptors[idx], self.timestamp
        )

    @classmethod
    def empty(cls, timestamp: float = 0.0) -> "FrameFeatures":
        return cls(
            np.zeros((0, 2)),
            np.zeros(0),
            np.zeros(0, dtype=np.int32),
            np.zeros((0, DESCRIPTOR_BYTES), dtype=np.uint8),
            timestamp,
        )


def as_descriptor_array(descriptors) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(descriptors, dtype=np.uint8))
    if arr.size == 0:
        return np.zeros((0, DESCRIPTOR_BYTES), dtype=np.uint8)
    arr = arr.reshape(-1, arr.shape[-1])
    if arr.shape[1] != DESCRIPTOR_BYTES:
        raise ValueError(f"Descriptors must be {DESCRIPTOR_BYTES} bytes wide, got {arr.shape[1]}")
    return arr
