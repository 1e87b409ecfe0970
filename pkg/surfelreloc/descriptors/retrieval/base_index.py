from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np


class EmptyDatabaseError(LookupError):
    """Raised when querying an index or database that holds no keyframes."""


@dataclass(frozen=True)
class FrameSignature:
    """What a retrieval backend needs from a frame: its global vector and word ids."""

    global_descriptor: np.ndarray
    words: np.ndarray


class BaseRetrievalIndex(ABC):
    """Abstract base class for keyframe retrieval backends.

    Results are lists of ``(keyframe_id, similarity)`` sorted by descending similarity,
    ties broken by the smaller keyframe id.
    """

    name = "base"

    def __init__(self, **kwargs):
        self.kwargs = kwargs
        self._entries: Dict[int, FrameSignature] = {}

    def add(self, keyframe_id: int, signature: FrameSignature) -> None:
        self._entries[int(keyframe_id)] = signature
        self._invalidate()

    def remove(self, keyframe_id: int) -> None:
        if self._entries.pop(int(keyframe_id), None) is not None:
            self._invalidate()

    def ids(self) -> List[int]:
        return sorted(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, keyframe_id: int) -> bool:
        return int(keyframe_id) in self._entries

    def query(self, signature: FrameSignature, k: int) -> List[Tuple[int, float]]:
        if not self._entries:
            raise EmptyDatabaseError("Retrieval index is empty")
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        ids, scores = self._scores(signature, k)
        order = np.lexsort((ids, -scores))[:k]
        return [(int(ids[i]), float(scores[i])) for i in order]

    @abstractmethod
    def _scores(self, signature: FrameSignature, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Return (keyframe ids, similarity scores) for candidate keyframes."""
        pass

    def _invalidate(self) -> None:
        """Drop cached acceleration structures after a mutation."""
        pass
