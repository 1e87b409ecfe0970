import os
from dataclasses import asdict

from surfelreloc.mapping.database import DatabaseSettings
from surfelreloc.optim.surfel_opt import OptimizerSettings
from surfelreloc.pipeline.config import RelocConfig
from surfelreloc.simulation.noise import NoiseSpec
from surfelreloc.simulation.presets import ROOM
from surfelreloc.simulation.scenes import SceneSpec

_database = DatabaseSettings().to_dict()
_retrieval_backend = _database.pop("retrieval_backend")
_accelerator = _database.pop("accelerator")
_scene = SceneSpec().to_dict()
_scene.pop("seed")
_reloc = RelocConfig().to_dict()
_reloc.pop("seed")

DEFAULT_CONFIG = {
    "project_dir": os.path.abspath(os.path.join(os.path.dirname(__file__), ".")),
    # Camera intrinsics shared by mapping and query frames
    "camera": {"fx": 240.0, "fy": 240.0, "cx": 160.0, "cy": 120.0, "width": 320, "height": 240},
    # Simulated world, room preset by default
    "scene": {**_scene, **ROOM["scene"]},
    "noise": asdict(NoiseSpec()),
    "trajectory": {"camera_height": 1.5, **ROOM["trajectory"]},
    # Descriptors, vocabulary and retrieval
    "descriptor": {
        "vocab_size": 64,
        "vocab_iterations": 25,
        "train_sample": 5000,
        "retrieval_backend": _retrieval_backend,  # Options: vlad, bow
        "accelerator": _accelerator,  # Options: auto, brute, kdtree (vlad only)
    },
    "database": _database,
    "optimizer": asdict(OptimizerSettings()),
    "reloc": _reloc,
    # Acceptance gates checked by the eval command
    "eval": {"min_recall": 0.99, "max_mate_cm": 1.0},
    "run": {
        "seed": 0,
        "results_dir": os.getenv("SURFELRELOC_RESULTS_DIR", "./results"),
    },
}
