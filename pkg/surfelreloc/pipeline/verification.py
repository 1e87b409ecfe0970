from dataclasses import dataclass
from typing import Optional

from surfelreloc.geometry.se3 import SE3Pose

VERIFIED = "verified"
INLIER_UNVERIFIED = "inlier-unverified"
FAILED = "failed"


def verify_pose(
    n_in: int,
    pose: Optional[SE3Pose],
    last_inlier_pose: Optional[SE3Pose],
    inlier_threshold: int,
    verify_distance: float,
) -> str:
    """Two-stage gate: inlier count, then distance to the last inlier pose.

    Without a previous inlier pose the first inlier pose is verified.
    """
    if pose is None or n_in < inlier_threshold:
        return FAILED
    if last_inlier_pose is None or pose.distance_to(last_inlier_pose) <= verify_distance:
        return VERIFIED
    return INLIER_UNVERIFIED


@dataclass
class VerificationState:
    """Per-session last inlier pose, owned by whoever feeds the queries in order."""

    last_inlier_pose: Optional[SE3Pose] = None

    def update(self, n_in: int, pose: Optional[SE3Pose], inlier_threshold: int, verify_distance: float) -> str:
        status = verify_pose(n_in, pose, self.last_inlier_pose, inlier_threshold, verify_distance)
        if status != FAILED:
            self.last_inlier_pose = pose
        return status

    def reset(self) -> None:
        self.last_inlier_pose = None
