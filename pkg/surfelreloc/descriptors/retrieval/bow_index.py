"""Bag-of-words retrieval using BM25 scoring over visual-word tokens."""

from typing import List, Optional, Tuple

import numpy as np
from rank_bm25 import BM25Okapi

from .base_index import BaseRetrievalIndex, FrameSignature


class BowIndex(BaseRetrievalIndex):
    """Visual-word index scored with BM25 (an inverted-index tf-idf variant).

    Scores are normalized by the best score of each query so similarities lie in [0, 1].
    """

    name = "bow"

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self._ids: Optional[np.ndarray] = None
        self.bm25: Optional[BM25Okapi] = None

    def _tokenize(self, words: np.ndarray) -> List[str]:
        return [f"w{int(w)}" for w in words]

    def _invalidate(self) -> None:
        self.bm25 = None

    def _rebuild_index(self) -> None:
        self._ids = np.asarray(self.ids(), dtype=np.int64)
        corpus = [self._tokenize(self._entries[i].words) for i in self._ids.tolist()]
        self.bm25 = BM25Okapi(corpus)

    def _scores(self, signature: FrameSignature, k: int) -> Tuple[np.ndarray, np.ndarray]:
        if self.bm25 is None:
            self._rebuild_index()
        scores = np.asarray(self.bm25.get_scores(self._tokenize(signature.words)), dtype=np.float64)
        max_score = scores.max() if scores.size else 0.0
        if max_score > 0:
            scores = scores / max_score
        return self._ids, scores
