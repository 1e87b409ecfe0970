from typing import Annotated, Dict, List, Optional

from typing_extensions import TypedDict


class CandidateTrace(TypedDict):
    rank: Annotated[int, "Cluster rank by canonical retrieval score"]
    canonical: Annotated[int, "Canonical keyframe id"]
    score: Annotated[float, "Retrieval similarity of the canonical keyframe"]
    members: Annotated[List[int], "Retrieved keyframes in the cluster"]
    visible_points: Annotated[int, "Map points seen by the canonical and covisible keyframes"]
    neighbor_points: Annotated[int, "Map points on neighboring surfels not in the visible set"]
    matches: Annotated[int, "2D-3D matches before the essential check"]
    neighbor_matches: Annotated[int, "Matches coming from the neighbor set"]
    essential_kept: Annotated[int, "Matches kept by the essential check"]
    essential_flag: Annotated[Optional[str], "Why the essential check was skipped, if it was"]
    pnp_inliers: Annotated[int, "PnP RANSAC inliers"]
    n_in: Annotated[int, "Inliers after motion-only refinement"]
    status: Annotated[str, "ok or the stage at which the candidate failed"]


class RelocTrace(TypedDict):
    timestamp: Annotated[float, "Query timestamp"]
    retrieved: Annotated[List[List[float]], "Retrieved (keyframe id, score) pairs"]
    candidates: Annotated[List[CandidateTrace], "Per-cluster outcome in processing order"]
    best: Annotated[Optional[int], "Index into candidates of the chosen pose"]
    reason: Annotated[Optional[str], "Failure reason when no candidate produced a pose"]
    timing_ms: Annotated[Dict[str, float], "Wall-clock time per stage"]


def empty_candidate_trace(rank: int, canonical: int, score: float, members: List[int]) -> CandidateTrace:
    return CandidateTrace(
        rank=rank,
        canonical=int(canonical),
        score=float(score),
        members=[int(m) for m in members],
        visible_points=0,
        neighbor_points=0,
        matches=0,
        neighbor_matches=0,
        essential_kept=0,
        essential_flag=None,
        pnp_inliers=0,
        n_in=0,
        status="pending",
    )
