from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from surfelreloc.geometry.se3 import SE3Pose

from .metrics import compute_mate, compute_recall, pr_sweep, translation_errors
from .records import ResultRecord


@dataclass
class EvalReport:
    recall: float
    mate_cm: Optional[float]
    queries: int
    verified: int
    unverified: int
    failed: int
    recall_threshold: float
    errors: pd.DataFrame = field(repr=False)
    pr: pd.DataFrame = field(repr=False)

    def passes(self, min_recall: float, max_mate_cm: float) -> bool:
        return self.recall >= min_recall and self.mate_cm is not None and self.mate_cm <= max_mate_cm

    def summary(self) -> dict:
        return {
            "queries": self.queries,
            "verified": self.verified,
            "inlier_unverified": self.unverified,
            "failed": self.failed,
            "recall_threshold_m": self.recall_threshold,
            "recall": self.recall,
            "mate_cm": self.mate_cm,
        }

    def summary_text(self) -> str:
        lines = []
        for key, value in self.summary().items():
            shown = "absent" if value is None else (f"{value:.6f}" if isinstance(value, float) else str(value))
            lines.append(f"{key} = {shown}")
        return "\n".join(lines) + "\n"

    def write(self, directory: Union[str, Path]) -> List[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        summary_path = directory / "eval_summary.txt"
        summary_path.write_text(self.summary_text(), encoding="utf-8")
        pr_path = directory / "pr_curve.csv"
        self.pr.to_csv(pr_path, index=False, float_format="%.6f")
        errors_path = directory / "query_errors.csv"
        self.errors.to_csv(errors_path, index=False, float_format="%.6f")
        return [summary_path, pr_path, errors_path]


def evaluate(
    records: Sequence[ResultRecord],
    gt_timestamps: Sequence[float],
    gt_poses: Sequence[SE3Pose],
    recall_threshold: float = 0.3,
    verify_distance: float = 0.3,
) -> EvalReport:
    """Recall, mATE and both precision-recall sweeps (with and without pose verification)."""
    errors = translation_errors(records, gt_timestamps, gt_poses)
    total = len(gt_timestamps)
    pr_on = pr_sweep(records, errors, total, recall_threshold, True, verify_distance)
    pr_off = pr_sweep(records, errors, total, recall_threshold, False, verify_distance)
    pr = pr_on.rename(columns={"accepted": "accepted_pv", "precision": "precision_pv", "recall": "recall_pv"})
    pr = pr.merge(pr_off, on="threshold")
    statuses = [r.status for r in records]
    per_query = pd.DataFrame(
        {
            "timestamp": [r.timestamp for r in records],
            "status": statuses,
            "n_in": [r.n_in for r in records],
            "error_m": errors,
        }
    )
    return EvalReport(
        recall=compute_recall(records, errors, total, recall_threshold),
        mate_cm=compute_mate(records, errors),
        queries=total,
        verified=statuses.count("verified"),
        unverified=statuses.count("inlier-unverified"),
        failed=statuses.count("failed"),
        recall_threshold=recall_threshold,
        errors=per_query,
        pr=pr,
    )


def pr_curves(report: EvalReport):
    """Split the merged sweep back into PV-on and PV-off frames."""
    on = report.pr[["threshold", "accepted_pv", "precision_pv", "recall_pv"]].rename(
        columns={"accepted_pv": "accepted", "precision_pv": "precision", "recall_pv": "recall"}
    )
    off = report.pr[["threshold", "accepted", "precision", "recall"]]
    return on, off


