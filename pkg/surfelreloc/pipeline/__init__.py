from .candidates import CandidatePoints, Correspondences, gather_candidate_points, match_candidates
from .clustering import CandidateCluster, cluster_candidates
from .config import MODES, OUTDOOR_VERIFY_DISTANCE, RelocConfig
from .essential import EssentialCheck, essential_check, eight_point, sampson_distances
from .pnp import PnPResult, epnp, pnp_ransac
from .refinement import RefinedPose, refine_pose
from .relocalizer import RelocalizationResult, Relocalizer, relocalize, relocalize_sequence
from .verification import FAILED, INLIER_UNVERIFIED, VERIFIED, VerificationState, verify_pose

__all__ = [
    "CandidateCluster",
    "CandidatePoints",
    "Correspondences",
    "EssentialCheck",
    "FAILED",
    "INLIER_UNVERIFIED",
    "MODES",
    "OUTDOOR_VERIFY_DISTANCE",
    "PnPResult",
    "RefinedPose",
    "RelocConfig",
    "RelocalizationResult",
    "Relocalizer",
    "VERIFIED",
    "VerificationState",
    "cluster_candidates",
    "eight_point",
    "epnp",
    "essential_check",
    "gather_candidate_points",
    "match_candidates",
    "pnp_ransac",
    "refine_pose",
    "relocalize",
    "relocalize_sequence",
    "sampson_distances",
    "verify_pose",
]
