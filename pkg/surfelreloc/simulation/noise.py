from dataclasses import asdict, dataclass
from typing import List, Sequence

import numpy as np

from surfelreloc.geometry.se3 import SE3Pose


@dataclass
class NoiseSpec:
    pixel_sigma: float = 0.0  # px
    bit_flips: int = 0  # per observation, out of 256
    pose_sigma: float = 0.0  # m, database pose translation noise
    outlier_fraction: float = 0.0  # observations carrying another landmark's descriptor

    def __post_init__(self) -> None:
        if self.pixel_sigma < 0 or self.pose_sigma < 0:
            raise ValueError("Noise standard deviations must be non-negative")
        if not 0 <= self.bit_flips <= 256:
            raise ValueError(f"bit_flips must be within [0, 256], got {self.bit_flips}")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise ValueError(f"outlier_fraction must be within [0, 1], got {self.outlier_fraction}")

    def to_dict(self) -> dict:
        return asdict(self)


def perturb_poses(poses: Sequence[SE3Pose], sigma: float, seed: int = 0) -> List[SE3Pose]:
    """I.i.d. Gaussian noise on each translation; rotations are left untouched."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return list(poses)
    rng = np.random.default_rng([seed, 2])
    noise = rng.normal(0.0, sigma, size=(len(poses), 3))
    return [SE3Pose(p.rotation, p.translation + n) for p, n in zip(poses, noise)]
