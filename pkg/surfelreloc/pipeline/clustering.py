"""Covisibility clustering of retrieved keyframes."""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from surfelreloc.mapping.covisibility import CovisibilityGraph


@dataclass(frozen=True)
class CandidateCluster:
    members: Tuple[int, ...]
    canonical: int
    score: float


class _UnionFind:
    def __init__(self, items: Sequence[int]):
        self.parent: Dict[int, int] = {k: k for k in items}

    def find(self, k: int) -> int:
        root = k
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[k] != root:
            self.parent[k], k = root, self.parent[k]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def cluster_candidates(
    covisibility: CovisibilityGraph, retrieved: Sequence[Tuple[int, float]], n_max: int
) -> List[CandidateCluster]:
    """Group retrieved keyframes that share map points.

    Clusters are the connected components of the covisibility graph restricted to the
    retrieved keyframes. Each cluster's canonical keyframe has the highest retrieval
    score (ties to the smaller id); clusters are ordered by that score, descending, and
    at most ``n_max`` are kept.
    """
    if not retrieved:
        raise ValueError("No retrieved keyframes to cluster")
    scores = {int(k): float(s) for k, s in retrieved}
    ids = sorted(scores)
    uf = _UnionFind(ids)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            if covisibility.weight(a, b) > 0:
                uf.union(a, b)

    groups: Dict[int, List[int]] = {}
    for k in ids:
        groups.setdefault(uf.find(k), []).append(k)
    clusters = []
    for members in groups.values():
        canonical = min(members, key=lambda k: (-scores[k], k))
        clusters.append(CandidateCluster(tuple(members), canonical, scores[canonical]))
    clusters.sort(key=lambda c: (-c.score, c.canonical))
    return clusters[:n_max]
