from .ground_truth import GroundTruth, GroundTruthFormatError, load_ground_truth, place_label, save_ground_truth
from .noise import NoiseSpec, perturb_poses
from .observer import MAX_OBSERVATIONS, Observation, observe, observe_sequence, octave_for_depth, visible_landmarks
from .presets import PRESETS, get_preset
from .scenes import Landmarks, Plane, Scene, SceneSpec, generate_scene, occluded
from .session import SimulatedSequence, SimulationRun, simulate
from .trajectories import TrajectorySpec, circle, generate_trajectory, lawnmower, two_lane

__all__ = [
    "GroundTruth",
    "GroundTruthFormatError",
    "Landmarks",
    "MAX_OBSERVATIONS",
    "NoiseSpec",
    "Observation",
    "PRESETS",
    "Plane",
    "Scene",
    "SceneSpec",
    "SimulatedSequence",
    "SimulationRun",
    "TrajectorySpec",
    "circle",
    "generate_scene",
    "generate_trajectory",
    "get_preset",
    "lawnmower",
    "load_ground_truth",
    "observe",
    "observe_sequence",
    "occluded",
    "octave_for_depth",
    "perturb_poses",
    "place_label",
    "save_ground_truth",
    "simulate",
    "two_lane",
    "visible_landmarks",
]
