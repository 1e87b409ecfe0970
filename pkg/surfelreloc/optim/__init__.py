from .levenberg import LeastSquaresProblem, LMResult, levenberg_marquardt
from .reprojection import CHI2_2DOF_95, MotionOnlyResult, chi2_values, refine_motion_only
from .surfel_factors import (
    SurfelFactors,
    SurfelReprojFactor,
    build_surfel_factors,
    evaluate_factors,
    inverse_depth_on_plane,
    surfel_reproj_residual,
)
from .surfel_opt import (
    OptimizationReport,
    OptimizerSettings,
    RefreshReport,
    optimize_poses,
    refresh_map_points,
)

__all__ = [
    "CHI2_2DOF_95",
    "LMResult",
    "LeastSquaresProblem",
    "MotionOnlyResult",
    "OptimizationReport",
    "OptimizerSettings",
    "RefreshReport",
    "SurfelFactors",
    "SurfelReprojFactor",
    "build_surfel_factors",
    "chi2_values",
    "evaluate_factors",
    "inverse_depth_on_plane",
    "levenberg_marquardt",
    "optimize_poses",
    "refine_motion_only",
    "refresh_map_points",
    "surfel_reproj_residual",
]
