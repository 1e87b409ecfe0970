"""End-to-end generation of a database sequence and a query sequence from one config."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from surfelreloc.descriptors.features import FrameFeatures
from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose

from .ground_truth import GroundTruth
from .noise import NoiseSpec, perturb_poses
from .observer import DATABASE_STREAM, QUERY_STREAM, observe_sequence
from .scenes import Scene, SceneSpec, generate_scene
from .trajectories import TrajectorySpec, generate_trajectory

logger = logging.getLogger(__name__)


@dataclass
class SimulatedSequence:
    timestamps: np.ndarray
    poses: List[SE3Pose]  # true poses
    reported_poses: List[SE3Pose]  # what the mapping side is told (noisy for the database)
    frames: List[FrameFeatures]
    ground_truth: GroundTruth


@dataclass
class SimulationRun:
    scene: Scene
    camera: PinholeCamera
    database: SimulatedSequence
    query: SimulatedSequence


def chain_trajectories(scene: Scene, segments: Sequence[TrajectorySpec]):
    """Concatenate segments; each one starts one frame interval after the previous ends."""
    timestamps, poses = [], []
    t_next = None
    for seg in segments:
        if t_next is not None:
            seg.start_time = max(seg.start_time, t_next)
        ts, ps = generate_trajectory(scene, seg)
        timestamps.append(ts)
        poses += ps
        t_next = float(ts[-1]) + seg.frame_interval
    return np.concatenate(timestamps), poses


def _sequence(scene, cam, segments, noise, seed, stream, pose_sigma, role) -> SimulatedSequence:
    timestamps, poses = chain_trajectories(scene, segments)
    observations = observe_sequence(scene, timestamps, poses, cam, noise, seed, stream)
    reported = perturb_poses(poses, pose_sigma, seed) if pose_sigma > 0 else list(poses)
    gt = GroundTruth.from_sequence(scene, timestamps, poses, observations, {"role": role, "seed": seed})
    return SimulatedSequence(timestamps, poses, reported, [o.features for o in observations], gt)


def simulate(config: dict) -> SimulationRun:
    """Scene, database sequence and query sequence for a full configuration dict."""
    seed = int(config["run"]["seed"])
    scene = generate_scene(SceneSpec(**{**config["scene"], "seed": seed}))
    cam = PinholeCamera(**config["camera"])
    noise = NoiseSpec(**config["noise"])
    traj = config["trajectory"]
    height = float(traj.get("camera_height", 1.5))
    db_segments = [TrajectorySpec(**{"camera_height": height, **s}) for s in traj["database"]]
    q_segments = [TrajectorySpec(**{"camera_height": height, **s}) for s in traj["query"]]
    # queries start after the database sequence so timestamps never collide
    database = _sequence(scene, cam, db_segments, noise, seed, DATABASE_STREAM, noise.pose_sigma, "database")
    q_segments[0].start_time = max(q_segments[0].start_time, float(database.timestamps[-1]) + 1.0)
    query = _sequence(scene, cam, q_segments, noise, seed, QUERY_STREAM, 0.0, "query")
    logger.info(
        "Simulated %d database and %d query frames in a %s scene", len(database.frames), len(query.frames), scene.spec.kind
    )
    return SimulationRun(scene, cam, database, query)
