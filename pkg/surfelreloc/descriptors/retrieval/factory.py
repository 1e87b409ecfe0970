from typing import Optional

from surfelreloc.dataflows.config import get_config

from .base_index import BaseRetrievalIndex
from .bow_index import BowIndex
from .vlad_index import VladIndex


def create_retrieval_index(backend: Optional[str] = None, **kwargs) -> BaseRetrievalIndex:
    """Create a keyframe retrieval index.

    Args:
        backend: "vlad" or "bow"; defaults to the active config's
            ``descriptor.retrieval_backend``
        **kwargs: backend-specific arguments (e.g. ``accelerator`` for vlad)

    Raises:
        ValueError: If the backend is not supported
    """
    if backend is None:
        backend = get_config()["descriptor"]["retrieval_backend"]
    backend_lower = backend.lower()

    if backend_lower == "vlad":
        return VladIndex(**kwargs)

    if backend_lower == "bow":
        return BowIndex(**kwargs)

    raise ValueError(f"Unsupported retrieval backend: {backend}")
