from .config import get_config, initialize_config, merge_config, reset_config, set_config
from .utils import ArtifactExistsError, check_collisions, sha256_file

__all__ = [
    "ArtifactExistsError",
    "check_collisions",
    "get_config",
    "initialize_config",
    "merge_config",
    "reset_config",
    "set_config",
    "sha256_file",
]
