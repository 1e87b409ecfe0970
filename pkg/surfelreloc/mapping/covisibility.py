"""Weighted covisibility graph between keyframes."""

from collections import defaultdict
from typing import Dict, Iterable, List, Mapping, Tuple


class CovisibilityGraph:
    """Symmetric edge weights = number of map points two keyframes both observe."""

    def __init__(self):
        self._adj: Dict[int, Dict[int, int]] = defaultdict(dict)

    def add(self, a: int, b: int, weight: int = 1) -> None:
        if a == b:
            raise ValueError(f"Self edge on keyframe {a}")
        w = self._adj[a].get(b, 0) + weight
        if w <= 0:
            self._drop(a, b)
            return
        self._adj[a][b] = w
        self._adj[b][a] = w

    def decrement(self, a: int, b: int, weight: int = 1) -> None:
        self.add(a, b, -weight)

    def _drop(self, a: int, b: int) -> None:
        self._adj[a].pop(b, None)
        self._adj[b].pop(a, None)
        for k in (a, b):
            if k in self._adj and not self._adj[k]:
                del self._adj[k]

    def remove_node(self, a: int) -> None:
        for b in list(self._adj.get(a, {})):
            self._drop(a, b)
        self._adj.pop(a, None)

    def weight(self, a: int, b: int) -> int:
        return self._adj.get(a, {}).get(b, 0)

    def neighbors(self, a: int) -> List[int]:
        """Neighbors of ``a`` by descending weight, ties by smaller id."""
        return [b for b, _ in sorted(self._adj.get(a, {}).items(), key=lambda kv: (-kv[1], kv[0]))]

    def top_neighbors(self, a: int, n: int) -> List[int]:
        return self.neighbors(a)[:n]

    def edges(self) -> List[Tuple[int, int, int]]:
        return sorted((a, b, w) for a, nbrs in self._adj.items() for b, w in nbrs.items() if a < b)

    def __len__(self) -> int:
        return len(self.edges())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CovisibilityGraph):
            return NotImplemented
        return self.edges() == other.edges()

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[int, int, int]]) -> "CovisibilityGraph":
        graph = cls()
        for a, b, w in edges:
            graph.add(int(a), int(b), int(w))
        return graph

    @classmethod
    def from_observations(cls, observers: Iterable[Mapping[int, int]]) -> "CovisibilityGraph":
        """Recompute the graph from each map point's ``{keyframe: keypoint}`` observations."""
        graph = cls()
        for obs in observers:
            kfs = sorted(obs)
            for i, a in enumerate(kfs):
                for b in kfs[i + 1 :]:
                    graph.add(a, b)
        return graph
