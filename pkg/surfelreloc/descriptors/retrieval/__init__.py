from .base_index import BaseRetrievalIndex, EmptyDatabaseError, FrameSignature
from .bow_index import BowIndex
from .factory import create_retrieval_index
from .vlad_index import VladIndex

__all__ = [
    "BaseRetrievalIndex",
    "BowIndex",
    "EmptyDatabaseError",
    "FrameSignature",
    "VladIndex",
    "create_retrieval_index",
]
