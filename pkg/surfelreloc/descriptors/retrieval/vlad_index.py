"""Exact cosine-similarity index over L2-normalized global descriptors."""

from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .base_index import BaseRetrievalIndex, FrameSignature

BRUTE_FORCE_LIMIT = 5000


class VladIndex(BaseRetrievalIndex):
    """Brute-force dot-product scan, with a KD-tree accelerator for large databases.

    Args:
        accelerator: "auto" (tree above ``BRUTE_FORCE_LIMIT`` keyframes), "brute" or "kdtree"
    """

    name = "vlad"

    def __init__(self, accelerator: str = "auto", **kwargs):
        super().__init__(**kwargs)
        if accelerator not in ("auto", "brute", "kdtree"):
            raise ValueError(f"Unsupported accelerator: {accelerator}")
        self.accelerator = accelerator
        self._ids: Optional[np.ndarray] = None
        self._matrix: Optional[np.ndarray] = None
        self._tree: Optional[cKDTree] = None

    def _invalidate(self) -> None:
        self._ids = None
        self._matrix = None
        self._tree = None

    def _rebuild(self) -> None:
        self._ids = np.asarray(self.ids(), dtype=np.int64)
        self._matrix = np.vstack([self._entries[i].global_descriptor for i in self._ids.tolist()])

    def _use_tree(self) -> bool:
        if self.accelerator == "kdtree":
            return True
        return self.accelerator == "auto" and len(self) > BRUTE_FORCE_LIMIT

    def _scores(self, signature: FrameSignature, k: int) -> Tuple[np.ndarray, np.ndarray]:
        if self._matrix is None:
            self._rebuild()
        q = np.asarray(signature.global_descriptor, dtype=np.float64)
        if not self._use_tree():
            return self._ids, self._matrix @ q
        if self._tree is None:
            self._tree = cKDTree(self._matrix)
        # squared chord distance is 2 - 2 * cosine on unit vectors
        k = min(len(self), max(k, int(self.kwargs.get("tree_candidates", 64))))
        _, rows = self._tree.query(q, k=k)
        rows = np.atleast_1d(rows)
        return self._ids[rows], self._matrix[rows] @ q
