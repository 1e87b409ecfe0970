from .covisibility import CovisibilityGraph
from .database import (
    DatabaseSettings,
    Keyframe,
    MapPoint,
    VisualDatabase,
    check_integrity,
    database_stats,
    update_representative_descriptor,
)
from .matching import local_grid_match
from .surfel_map import (
    EMPTY,
    PlaneCoeff,
    Surfel,
    SurfelIndexMap,
    SurfelMap,
    associate_keypoints,
    load_surfel_map,
    plane_coeff,
    render_index_map,
)

__all__ = [
    "CovisibilityGraph",
    "DatabaseSettings",
    "EMPTY",
    "Keyframe",
    "MapPoint",
    "PlaneCoeff",
    "Surfel",
    "SurfelIndexMap",
    "SurfelMap",
    "VisualDatabase",
    "associate_keypoints",
    "check_integrity",
    "database_stats",
    "load_surfel_map",
    "local_grid_match",
    "plane_coeff",
    "render_index_map",
    "update_representative_descriptor",
]
