"""Recall, mean translation error and precision-recall sweeps over result records."""

from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from surfelreloc.geometry.se3 import SE3Pose

from .records import EvaluationError, ResultRecord

TIMESTAMP_TOLERANCE = 1e-6


def translation_errors(
    records: Sequence[ResultRecord],
    gt_timestamps: Sequence[float],
    gt_poses: Sequence[SE3Pose],
    tolerance: float = TIMESTAMP_TOLERANCE,
) -> np.ndarray:
    """Per-record translation error (m), NaN for records without a pose.

    Every record must match exactly one ground-truth timestamp within ``tolerance``.
    """
    ts = np.asarray(gt_timestamps, dtype=np.float64)
    errors = np.full(len(records), np.nan)
    seen = set()
    for i, rec in enumerate(records):
        j = int(np.argmin(np.abs(ts - rec.timestamp))) if ts.size else -1
        if j < 0 or abs(ts[j] - rec.timestamp) > tolerance:
            raise EvaluationError(f"Result at t={rec.timestamp!r} has no ground-truth frame")
        if j in seen:
            raise EvaluationError(f"Several results for ground-truth frame t={ts[j]!r}")
        seen.add(j)
        if rec.pose is not None:
            errors[i] = rec.pose.distance_to(gt_poses[j])
    return errors


def compute_recall(
    records: Sequence[ResultRecord], errors: np.ndarray, total: int, threshold: float = 0.3
) -> float:
    """Verified poses within ``threshold`` metres over the number of queries."""
    if total <= 0:
        raise EvaluationError("Recall needs at least one query")
    hits = sum(1 for r, e in zip(records, errors) if r.status == "verified" and e <= threshold)
    return hits / total


def compute_mate(records: Sequence[ResultRecord], errors: np.ndarray) -> Optional[float]:
    """Mean translation error of verified poses in centimetres; None without verified poses."""
    verified = [e for r, e in zip(records, errors) if r.status == "verified"]
    if not verified:
        return None
    return float(np.mean(verified) * 100.0)


def accepted_mask(
    records: Sequence[ResultRecord], threshold: int, verification: bool, verify_distance: float
) -> np.ndarray:
    """Records whose pose would be accepted at inlier threshold ``threshold``.

    With verification the distance gate is replayed in record order against the last
    pose that passed the inlier threshold.
    """
    accepted = np.zeros(len(records), dtype=bool)
    last: Optional[SE3Pose] = None
    for i, rec in enumerate(records):
        if rec.pose is None or rec.n_in < threshold:
            continue
        if not verification:
            accepted[i] = True
            continue
        accepted[i] = last is None or rec.pose.distance_to(last) <= verify_distance
        last = rec.pose
    return accepted


def pr_sweep(
    records: Sequence[ResultRecord],
    errors: np.ndarray,
    total: int,
    recall_threshold: float = 0.3,
    verification: bool = True,
    verify_distance: float = 0.3,
) -> pd.DataFrame:
    """Precision and recall for every integer inlier threshold ``0..max n_in``.

    Precision is 1.0 when nothing is accepted.
    """
    order = np.argsort([r.timestamp for r in records], kind="stable")
    records = [records[i] for i in order]
    errors = np.asarray(errors)[order]
    correct = np.nan_to_num(errors, nan=np.inf) <= recall_threshold
    max_n_in = max((r.n_in for r in records), default=0)
    rows: List[dict] = []
    for t in range(max_n_in + 1):
        acc = accepted_mask(records, t, verification, verify_distance)
        n_acc = int(acc.sum())
        n_ok = int((acc & correct).sum())
        rows.append(
            {
                "threshold": t,
                "accepted": n_acc,
                "precision": n_ok / n_acc if n_acc else 1.0,
                "recall": n_ok / total if total else 0.0,
            }
        )
    return pd.DataFrame(rows, columns=["threshold", "accepted", "precision", "recall"])


def dominates(pr_on: pd.DataFrame, pr_off: pd.DataFrame) -> tuple:
    """(weak, strict): PV-on precision against PV-off at every common recall value."""
    common = sorted(set(pr_on["recall"]) & set(pr_off["recall"]))
    weak, strict = True, False
    for r in common:
        p_on = pr_on.loc[pr_on["recall"] == r, "precision"].max()
        p_off = pr_off.loc[pr_off["recall"] == r, "precision"].max()
        weak &= bool(p_on >= p_off - 1e-12)
        strict |= bool(p_on > p_off + 1e-12)
    return weak, weak and strict
