import threading
from collections import Counter
from typing import Any, Dict

from surfelreloc.pipeline.relocalizer import RelocalizationResult
from surfelreloc.pipeline.verification import FAILED, INLIER_UNVERIFIED, VERIFIED


class RelocStatsHandler:
    """Tracks relocalization outcomes and per-stage time across queries."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.queries = 0
        self.statuses: Counter = Counter()
        self.stage_ms: Dict[str, float] = {}

    def on_result(self, result: RelocalizationResult) -> None:
        """Count the status and accumulate the stage timings of one result."""
        timing = (result.diagnostics or {}).get("timing_ms", {})
        with self._lock:
            self.queries += 1
            self.statuses[result.status] += 1
            for stage, ms in timing.items():
                self.stage_ms[stage] = self.stage_ms.get(stage, 0.0) + float(ms)

    def get_stats(self) -> Dict[str, Any]:
        """Return current statistics."""
        with self._lock:
            stats: Dict[str, Any] = {"queries": self.queries}
            for status in (VERIFIED, INLIER_UNVERIFIED, FAILED):
                stats[status] = self.statuses.get(status, 0)
            for stage, ms in sorted(self.stage_ms.items()):
                stats[f"{stage}_ms_per_query"] = ms / self.queries if self.queries else 0.0
            return stats
