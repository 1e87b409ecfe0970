from typing import Annotated, Dict, List, Optional

from typing_extensions import TypedDict


class StageTiming(TypedDict, total=False):
    render: Annotated[float, "Index-map rendering time (ms)"]
    associate: Annotated[float, "Keypoint-to-surfel association time (ms)"]
    match: Annotated[float, "Covisible point projection and grid matching time (ms)"]
    update: Annotated[float, "Observation, map point and covisibility update time (ms)"]
    cull: Annotated[float, "Keyframe and map point culling time (ms)"]


class FrameReport(TypedDict):
    frame: Annotated[int, "Index of the frame in its input sequence"]
    timestamp: Annotated[float, "Frame timestamp"]
    status: Annotated[str, "accepted or rejected"]
    reason: Annotated[Optional[str], "Rejection reason (outside-map, no-map-points, degenerate-global)"]
    keyframe_id: Annotated[Optional[int], "Assigned keyframe id, None when rejected"]
    keypoints: Annotated[int, "Number of keypoints in the frame"]
    rendered_pixels: Annotated[int, "Pixels covered by the rendered surfel index map"]
    associated: Annotated[int, "Keypoints associated with a surfel"]
    skipped_keypoints: Annotated[int, "Keypoints outside the image bounds"]
    covisible_frames: Annotated[int, "Keyframes observing any associated surfel"]
    candidate_points: Annotated[int, "Covisible map points projected into the image"]
    matched: Annotated[int, "Keypoints matched to existing map points"]
    new_points: Annotated[int, "Map points created at surfel centers"]
    culled_keyframes: Annotated[List[int], "Keyframe ids removed by duplicate culling"]
    culled_points: Annotated[int, "Map points removed by culling"]
    timing_ms: Annotated[StageTiming, "Per-stage wall-clock time"]


class DatabaseStats(TypedDict):
    keyframes: int
    map_points: int
    observations: int
    covisibility_edges: int
    next_keyframe_id: int


def empty_frame_report(frame: int, timestamp: float, keypoints: int) -> FrameReport:
    return FrameReport(
        frame=frame,
        timestamp=timestamp,
        status="rejected",
        reason=None,
        keyframe_id=None,
        keypoints=keypoints,
        rendered_pixels=0,
        associated=0,
        skipped_keypoints=0,
        covisible_frames=0,
        candidate_points=0,
        matched=0,
        new_points=0,
        culled_keyframes=[],
        culled_points=0,
        timing_ms=StageTiming(),
    )


def stage_summary(reports: List[FrameReport]) -> Dict[str, int]:
    accepted = sum(1 for r in reports if r["status"] == "accepted")
    return {
        "frames": len(reports),
        "accepted": accepted,
        "rejected": len(reports) - accepted,
        "matched": sum(r["matched"] for r in reports),
        "new_points": sum(r["new_points"] for r in reports),
        "culled_keyframes": sum(len(r["culled_keyframes"]) for r in reports),
        "culled_points": sum(r["culled_points"] for r in reports),
    }
