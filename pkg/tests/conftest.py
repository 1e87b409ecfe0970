import numpy as np
import pytest

from surfelreloc.dataflows.config import merge_config
from surfelreloc.dataflows.database_io import decode_database, encode_database
from surfelreloc.default_config import DEFAULT_CONFIG
from surfelreloc.descriptors.features import FrameFeatures
from surfelreloc.descriptors.vocabulary import Vocabulary
from surfelreloc.evaluation.experiments import build_database
from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose
from surfelreloc.mapping.database import VisualDatabase
from surfelreloc.mapping.surfel_map import SurfelMap
from surfelreloc.simulation.session import simulate

SMALL_RUN = {
    "scene": {"landmark_density": 20.0},
    "trajectory": {
        "database": [{"kind": "circle", "frames": 24, "radius": 0.5, "center": [2.0, 2.0]}],
        "query": [{"kind": "circle", "frames": 8, "radius": 0.6, "center": [2.0, 2.0], "phase": 0.1}],
    },
    "descriptor": {"vocab_size": 32},
    "run": {"seed": 3},
}


@pytest.fixture(scope="session")
def camera() -> PinholeCamera:
    return PinholeCamera(fx=240.0, fy=240.0, cx=160.0, cy=120.0, width=320, height=240)


@pytest.fixture(scope="session")
def small_config() -> dict:
    return merge_config(DEFAULT_CONFIG, SMALL_RUN)


@pytest.fixture(scope="session")
def sim_run(small_config):
    return simulate(small_config)


@pytest.fixture(scope="session")
def built(sim_run, small_config):
    db, reports = build_database(
        sim_run.database.frames,
        sim_run.database.reported_poses,
        sim_run.scene.surfel_map,
        sim_run.camera,
        small_config,
    )
    return encode_database(db), reports


@pytest.fixture
def small_db(built):
    """A private copy of the session database, safe to mutate."""
    return decode_database(built[0])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def wall() -> SurfelMap:
    """5x4 grid of surfels on the plane z = 2, facing a camera at the origin."""
    xs, ys = np.meshgrid(np.linspace(-0.6, 0.6, 5), np.array([-0.45, -0.15, 0.15, 0.45]))
    centers = np.column_stack([xs.ravel(), ys.ravel(), np.full(xs.size, 2.0)])
    normals = np.tile([0.0, 0.0, -1.0], (xs.size, 1))
    return SurfelMap(centers, normals, np.full(xs.size, 0.15))


@pytest.fixture(scope="session")
def wall_frame(camera, wall):
    """Factory for frames whose keypoints sit exactly on the projected wall surfel centers."""
    descriptors = np.random.default_rng(7).integers(0, 256, (len(wall), 32), dtype=np.uint8)

    def make(pose: SE3Pose = SE3Pose.identity(), subset=None, timestamp: float = 0.0) -> FrameFeatures:
        idx = np.arange(len(wall)) if subset is None else np.asarray(subset)
        uv, _ = camera.project_points(pose.inverse_transform(wall.centers[idx]))
        return FrameFeatures(uv, np.full(idx.size, 4.0), np.zeros(idx.size), descriptors[idx], timestamp)

    make.descriptors = descriptors
    return make


@pytest.fixture
def wall_db(camera) -> VisualDatabase:
    words = np.random.default_rng(1).integers(0, 256, (8, 32), dtype=np.uint8)
    return VisualDatabase(camera, Vocabulary(words))
