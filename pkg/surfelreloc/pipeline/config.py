from dataclasses import asdict, dataclass

from surfelreloc.descriptors.binary import DEFAULT_MAX_DISTANCE, DEFAULT_RATIO
from surfelreloc.mapping.matching import DEFAULT_GRID_CELL, DEFAULT_WINDOW
from surfelreloc.optim.reprojection import CHI2_2DOF_95

MODES = ("full", "visible", "naive")
INDOOR_VERIFY_DISTANCE = 0.3
OUTDOOR_VERIFY_DISTANCE = 0.8


@dataclass
class RelocConfig:
    top_k: int = 30
    n_max: int = 3  # clusters tried per query
    n_co: int = 5  # covisible keyframes joined to each canonical keyframe
    inlier_threshold: int = 15
    verify_distance: float = INDOOR_VERIFY_DISTANCE  # m
    recall_threshold: float = 0.3  # m
    ratio: float = DEFAULT_RATIO
    max_distance: int = DEFAULT_MAX_DISTANCE
    window: float = DEFAULT_WINDOW
    grid_cell: float = DEFAULT_GRID_CELL
    pnp_threshold: float = 5.0  # px, scaled by 1.2**octave
    pnp_iterations: int = 300
    essential_threshold: float = 4.0  # px
    essential_iterations: int = 200
    confidence: float = 0.99
    refine_rounds: int = 4
    chi2_gate: float = CHI2_2DOF_95
    mode: str = "full"  # Options: full, visible, naive
    use_essential: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"Unsupported relocalization mode: {self.mode}")
        for name in ("top_k", "n_max", "inlier_threshold", "pnp_iterations", "essential_iterations", "refine_rounds"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_co < 0:
            raise ValueError(f"n_co must be non-negative, got {self.n_co}")
        for name in ("verify_distance", "recall_threshold", "window", "grid_cell", "pnp_threshold", "essential_threshold", "chi2_gate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")

    def to_dict(self) -> dict:
        return asdict(self)
