"""Named experiment setups as overrides of the default configuration sections."""

import copy
from typing import Dict

ROOM = {
    "scene": {"kind": "room", "length": 4.0, "width": 4.0, "height": 3.0, "surfel_radius": 0.1, "landmark_density": 20.0},
    "trajectory": {
        "database": [{"kind": "circle", "frames": 60, "radius": 0.5, "center": [2.0, 2.0]}],
        "query": [{"kind": "circle", "frames": 30, "radius": 0.7, "center": [2.0, 2.0], "phase": 0.05}],
    },
}

CORRIDOR = {
    "scene": {"kind": "corridor", "length": 12.0, "width": 2.0, "height": 3.0, "surfel_radius": 0.1, "landmark_density": 20.0},
    "trajectory": {
        "database": [{"kind": "lawnmower", "frames": 80, "row_spacing": 0.5, "margin": 0.25}],
        "query": [{"kind": "lawnmower", "frames": 40, "row_spacing": 0.5, "margin": 0.5}],
    },
}

TWO_LANE = {
    "scene": {"kind": "two_lane", "length": 30.0, "width": 8.0, "height": 6.0, "surfel_radius": 0.1, "landmark_density": 8.0},
    "trajectory": {
        "database": [{"kind": "two_lane", "frames": 60, "lane": 0, "lane_width": 3.0}],
        "query": [{"kind": "two_lane", "frames": 30, "lane": 1, "lane_width": 3.0}],
    },
    "reloc": {"verify_distance": 0.8},
}

TWIN_ROOMS = {
    "scene": {"kind": "twin_rooms", "length": 4.0, "width": 4.0, "height": 3.0, "surfel_radius": 0.1, "landmark_density": 20.0},
    "trajectory": {
        "database": [
            {"kind": "circle", "frames": 40, "radius": 0.5, "center": [2.0, 2.0], "room": 0},
            {"kind": "circle", "frames": 40, "radius": 0.5, "center": [7.0, 2.0], "room": 1},
        ],
        "query": [
            {"kind": "circle", "frames": 20, "radius": 0.7, "center": [2.0, 2.0], "room": 0, "phase": 0.05},
            {"kind": "circle", "frames": 20, "radius": 0.7, "center": [7.0, 2.0], "room": 1, "phase": 0.05},
        ],
    },
}

PRESETS: Dict[str, dict] = {
    "room": ROOM,
    "corridor": CORRIDOR,
    "two-lane": TWO_LANE,
    "twin-rooms": TWIN_ROOMS,
}


def get_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ValueError(f"Unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return copy.deepcopy(PRESETS[name])
