from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class Preset(str, Enum):
    ROOM = "room"
    CORRIDOR = "corridor"
    TWO_LANE = "two-lane"
    TWIN_ROOMS = "twin-rooms"


class RelocMode(str, Enum):
    FULL = "full"
    VISIBLE = "visible"
    NAIVE = "naive"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=True)


class CameraConfig(_Section):
    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    width: int = Field(gt=0)
    height: int = Field(gt=0)


class SceneConfig(_Section):
    kind: str = Field(pattern="^(room|corridor|two_lane|twin_rooms)$")
    length: float = Field(gt=0)
    width: float = Field(gt=0)
    height: float = Field(gt=0)
    surfel_radius: float = Field(gt=0)
    pitch_factor: float = Field(gt=0)
    landmark_density: float = Field(gt=0)
    prototypes: int = Field(gt=0)
    prototype_flips: int = Field(ge=0, le=256)


class NoiseConfig(_Section):
    pixel_sigma: float = Field(ge=0)
    bit_flips: int = Field(ge=0, le=256)
    pose_sigma: float = Field(ge=0)
    outlier_fraction: float = Field(ge=0, le=1)


class TrajectorySegment(_Section):
    kind: str = Field(pattern="^(circle|lawnmower|two_lane)$")
    frames: int = Field(gt=0)
    loops: float = 1.0
    radius: float = Field(default=0.5, ge=0)
    center: Tuple[float, float] = (2.0, 2.0)
    lane: int = Field(default=0, ge=0, le=1)
    lane_width: float = Field(default=3.0, gt=0)
    row_spacing: float = Field(default=0.5, gt=0)
    margin: float = Field(default=0.25, ge=0)
    room: int = Field(default=0, ge=0)
    phase: float = 0.0
    start_time: float = 0.0
    frame_interval: float = Field(default=0.1, gt=0)
    camera_height: Optional[float] = Field(default=None, gt=0)


class TrajectoryConfig(_Section):
    camera_height: float = Field(gt=0)
    database: List[TrajectorySegment] = Field(min_length=1)
    query: List[TrajectorySegment] = Field(min_length=1)


class DescriptorConfig(_Section):
    vocab_size: int = Field(gt=0)
    vocab_iterations: int = Field(gt=0)
    train_sample: int = Field(gt=0)
    retrieval_backend: str = Field(pattern="^(vlad|bow)$")
    accelerator: str = Field(pattern="^(auto|brute|kdtree)$")


class DatabaseConfig(_Section):
    window: float = Field(gt=0)
    grid_cell: float = Field(gt=0)
    ratio: float = Field(gt=0, le=1)
    max_distance: int = Field(ge=0, le=256)
    duplicate_ratio: float = Field(gt=0, le=1)
    duplicate_min_observers: int = Field(gt=0)
    recent_point_window: int = Field(gt=0)


class OptimizerConfig(_Section):
    max_iterations: int = Field(gt=0)
    huber_delta: float = Field(gt=0)
    initial_lambda: float = Field(gt=0)
    relative_tolerance: float = Field(gt=0)
    den_eps: float = Field(gt=0)
    rho_min: float = Field(gt=0)
    max_depth: float = Field(gt=0)


class RelocSection(_Section):
    top_k: int = Field(gt=0)
    n_max: int = Field(gt=0)
    n_co: int = Field(ge=0)
    inlier_threshold: int = Field(gt=0)
    verify_distance: float = Field(gt=0)
    recall_threshold: float = Field(gt=0)
    ratio: float = Field(gt=0, le=1)
    max_distance: int = Field(ge=0, le=256)
    window: float = Field(gt=0)
    grid_cell: float = Field(gt=0)
    pnp_threshold: float = Field(gt=0)
    pnp_iterations: int = Field(gt=0)
    essential_threshold: float = Field(gt=0)
    essential_iterations: int = Field(gt=0)
    confidence: float = Field(gt=0, lt=1)
    refine_rounds: int = Field(gt=0)
    chi2_gate: float = Field(gt=0)
    mode: RelocMode
    use_essential: bool


class EvalConfig(_Section):
    min_recall: float = Field(ge=0, le=1)
    max_mate_cm: float = Field(ge=0)


class RunSection(_Section):
    seed: int = Field(ge=0)
    results_dir: str


class RunConfig(_Section):
    """Complete, validated configuration of one experiment run."""

    project_dir: str
    camera: CameraConfig
    scene: SceneConfig
    noise: NoiseConfig
    trajectory: TrajectoryConfig
    descriptor: DescriptorConfig
    database: DatabaseConfig
    optimizer: OptimizerConfig
    reloc: RelocSection
    eval: EvalConfig
    run: RunSection
