"""Line-oriented relocalization result records.

``timestamp status tx ty tz qx qy qz qw n_in cluster_count`` for poses and
``timestamp failed n_in cluster_count`` for failures.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np

from surfelreloc.geometry.se3 import SE3Pose

STATUSES = ("verified", "inlier-unverified", "failed")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ResultRecord:
    timestamp: float
    status: str
    pose: Optional[SE3Pose]
    n_in: int
    cluster_count: int

    @classmethod
    def from_result(cls, result) -> "ResultRecord":
        return cls(result.timestamp, result.status, result.pose, result.n_in, result.cluster_count)


def _num(x: float) -> str:
    return "%.17g" % x


def format_result_record(record: ResultRecord) -> str:
    if record.status == "failed":
        return f"{_num(record.timestamp)} failed {record.n_in} {record.cluster_count}"
    values = " ".join(_num(v) for v in record.pose.to_vector())
    return f"{_num(record.timestamp)} {record.status} {values} {record.n_in} {record.cluster_count}"


def parse_result_record(line: str, where: str = "line") -> ResultRecord:
    fields = line.split()
    try:
        if len(fields) == 4 and fields[1] == "failed":
            return ResultRecord(float(fields[0]), "failed", None, int(fields[2]), int(fields[3]))
        if len(fields) == 11 and fields[1] in STATUSES[:2]:
            pose = SE3Pose.from_vector(np.array([float(v) for v in fields[2:9]]))
            return ResultRecord(float(fields[0]), fields[1], pose, int(fields[9]), int(fields[10]))
    except ValueError as exc:
        raise EvaluationError(f"{where}: {exc}") from exc
    raise EvaluationError(f"{where}: malformed result record {line.strip()!r}")


def write_result_records(path: Union[str, Path], records: Iterable[ResultRecord]) -> int:
    lines = [format_result_record(r) for r in records]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(lines)


def load_result_records(path: Union[str, Path]) -> List[ResultRecord]:
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        records.append(parse_result_record(line, f"{path}:{lineno}"))
    return records
