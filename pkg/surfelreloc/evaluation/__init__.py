from .metrics import compute_mate, compute_recall, dominates, pr_sweep, translation_errors
from .records import (
    EvaluationError,
    ResultRecord,
    format_result_record,
    load_result_records,
    parse_result_record,
    write_result_records,
)
from .report import EvalReport, evaluate, pr_curves

__all__ = [
    "EvalReport",
    "EvaluationError",
    "ResultRecord",
    "compute_mate",
    "compute_recall",
    "dominates",
    "evaluate",
    "format_result_record",
    "load_result_records",
    "parse_result_record",
    "pr_curves",
    "pr_sweep",
    "translation_errors",
    "write_result_records",
]
