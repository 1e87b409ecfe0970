import numpy as np
import pandas as pd
import pytest

from surfelreloc.evaluation.experiments import evaluate_run, run_relocalization
from surfelreloc.evaluation.metrics import (
    accepted_mask,
    compute_mate,
    compute_recall,
    dominates,
    pr_sweep,
    translation_errors,
)
from surfelreloc.evaluation.records import (
    EvaluationError,
    ResultRecord,
    format_result_record,
    load_result_records,
    parse_result_record,
    write_result_records,
)
from surfelreloc.evaluation.report import evaluate, pr_curves
from surfelreloc.geometry.se3 import SE3Pose


def _at(x: float) -> SE3Pose:
    return SE3Pose(np.array([0.0, 0.0, 0.0, 1.0]), np.array([x, 0.0, 0.0]))


def _verified(t: float, x: float, n_in: int = 20) -> ResultRecord:
    return ResultRecord(t, "verified", _at(x), n_in, 1)


GT_TIMESTAMPS = [0.0, 1.0, 2.0, 3.0, 4.0]
GT_POSES = [_at(0.0)] * 5


class TestResultRecords:
    def test_failed_record_grammar(self):
        record = ResultRecord(1.5, "failed", None, 3, 2)
        assert format_result_record(record) == "1.5 failed 3 2"
        assert parse_result_record("1.5 failed 3 2") == record

    def test_pose_record_keeps_every_digit(self):
        pose = SE3Pose.exp([0.1, -0.2, 0.3, 0.01, 0.02, -0.03])
        line = format_result_record(ResultRecord(0.1, "inlier-unverified", pose, 12, 3))
        assert len(line.split()) == 11
        parsed = parse_result_record(line)
        assert parsed.status == "inlier-unverified"
        assert np.array_equal(parsed.pose.to_vector(), pose.to_vector())
        assert (parsed.n_in, parsed.cluster_count) == (12, 3)

    @pytest.mark.parametrize(
        "line",
        [
            "1.0 verified 3 2",
            "x failed 3 2",
            "1.0 accepted 0 0 0 0 0 0 1 5 1",
            "1.0 failed 3",
        ],
    )
    def test_malformed_records(self, line):
        with pytest.raises(EvaluationError):
            parse_result_record(line)

    def test_file_skips_comments(self, tmp_path):
        path = tmp_path / "results.txt"
        assert write_result_records(path, [_verified(0.0, 0.0), ResultRecord(1.0, "failed", None, 0, 0)]) == 2
        path.write_text("# header\n\n" + path.read_text())
        records = load_result_records(path)
        assert [r.status for r in records] == ["verified", "failed"]

    def test_bad_line_names_its_location(self, tmp_path):
        path = tmp_path / "results.txt"
        path.write_text("0 failed 0 0\n0 nonsense\n")
        with pytest.raises(EvaluationError, match=":2"):
            load_result_records(path)


class TestTranslationErrors:
    def test_failed_records_have_no_error(self):
        records = [_verified(0.0, 0.25), ResultRecord(1.0, "failed", None, 0, 0)]
        errors = translation_errors(records, GT_TIMESTAMPS, GT_POSES)
        assert errors[0] == pytest.approx(0.25)
        assert np.isnan(errors[1])

    def test_unknown_timestamp(self):
        with pytest.raises(EvaluationError, match="no ground-truth frame"):
            translation_errors([_verified(0.5, 0.0)], GT_TIMESTAMPS, GT_POSES)

    def test_duplicate_results(self):
        with pytest.raises(EvaluationError, match="Several results"):
            translation_errors([_verified(1.0, 0.0), _verified(1.0 + 1e-9, 0.0)], GT_TIMESTAMPS, GT_POSES)


class TestRecallAndMate:
    def test_one_large_error_costs_one_query(self):
        records = [_verified(t, 0.01) for t in GT_TIMESTAMPS[:4]] + [_verified(4.0, 0.4)]
        errors = translation_errors(records, GT_TIMESTAMPS, GT_POSES)
        assert compute_recall(records, errors, 5, 0.3) == pytest.approx(4 / 5)
        assert compute_mate(records, errors) == pytest.approx((4 * 1.0 + 40.0) / 5)

    def test_only_verified_poses_count(self):
        records = [_verified(0.0, 0.02), ResultRecord(1.0, "inlier-unverified", _at(0.0), 9, 1)]
        errors = translation_errors(records, GT_TIMESTAMPS, GT_POSES)
        assert compute_recall(records, errors, 5) == pytest.approx(1 / 5)
        assert compute_mate(records, errors) == pytest.approx(2.0)

    def test_mate_absent_without_verified_poses(self):
        records = [ResultRecord(0.0, "failed", None, 0, 0)]
        assert compute_mate(records, np.array([np.nan])) is None

    def test_recall_needs_queries(self):
        with pytest.raises(EvaluationError):
            compute_recall([], np.array([]), 0)


class TestPrecisionRecall:
    # the third pose jumps 5 m: PV rejects it, and it is wrong
    RECORDS = [_verified(0.0, 0.0, 10), _verified(1.0, 0.05, 8), _verified(2.0, 5.0, 12), _verified(3.0, 0.1, 4)]

    def test_one_row_per_threshold(self):
        errors = translation_errors(self.RECORDS, GT_TIMESTAMPS, GT_POSES)
        pr = pr_sweep(self.RECORDS, errors, 5)
        assert pr["threshold"].tolist() == list(range(13))
        assert list(pr.columns) == ["threshold", "accepted", "precision", "recall"]

    def test_verification_replays_the_last_pose(self):
        on = accepted_mask(self.RECORDS, 0, verification=True, verify_distance=0.3)
        off = accepted_mask(self.RECORDS, 0, verification=False, verify_distance=0.3)
        assert on.tolist() == [True, True, False, False]
        assert off.tolist() == [True, True, True, True]
        # records under the threshold neither pass nor move the last pose
        assert accepted_mask(self.RECORDS, 5, True, 0.3).tolist() == [True, True, False, False]
        assert accepted_mask(self.RECORDS, 9, True, 0.3).tolist() == [True, False, False, False]

    def test_precision_is_one_when_nothing_is_accepted(self):
        records = [ResultRecord(0.0, "failed", None, 3, 1)]
        pr = pr_sweep(records, np.array([np.nan]), 1)
        assert pr["accepted"].tolist() == [0, 0, 0, 0]
        assert pr["precision"].tolist() == [1.0] * 4
        assert pr["recall"].tolist() == [0.0] * 4

    def test_verification_dominates_on_a_jump(self):
        errors = translation_errors(self.RECORDS, GT_TIMESTAMPS, GT_POSES)
        on = pr_sweep(self.RECORDS, errors, 5, verification=True)
        off = pr_sweep(self.RECORDS, errors, 5, verification=False)
        assert on.loc[0, "precision"] == pytest.approx(1.0)
        assert off.loc[0, "precision"] == pytest.approx(3 / 4)
        assert dominates(on, off) == (True, True)
        assert dominates(off, on) == (False, False)

    def test_dominance_without_common_recall(self):
        a = pd.DataFrame({"precision": [1.0], "recall": [0.5]})
        b = pd.DataFrame({"precision": [0.5], "recall": [0.25]})
        assert dominates(a, b) == (True, False)


class TestEvalReport:
    def _report(self):
        records = [_verified(t, 0.002) for t in GT_TIMESTAMPS[:4]] + [ResultRecord(4.0, "failed", None, 2, 1)]
        return evaluate(records, GT_TIMESTAMPS, GT_POSES)

    def test_counts_and_gates(self):
        report = self._report()
        assert (report.queries, report.verified, report.unverified, report.failed) == (5, 4, 0, 1)
        assert report.recall == pytest.approx(0.8)
        assert report.mate_cm == pytest.approx(0.2)
        assert report.passes(0.8, 1.0)
        assert not report.passes(0.99, 1.0)
        assert not report.passes(0.8, 0.1)

    def test_merged_sweep_splits_back(self):
        report = self._report()
        on, off = pr_curves(report)
        assert list(on.columns) == list(off.columns) == ["threshold", "accepted", "precision", "recall"]
        assert len(on) == len(off) == 21

    def test_written_files(self, tmp_path):
        paths = self._report().write(tmp_path / "eval")
        assert [p.name for p in paths] == ["eval_summary.txt", "pr_curve.csv", "query_errors.csv"]
        summary = paths[0].read_text()
        assert "recall = 0.800000" in summary
        assert "failed = 1" in summary
        errors = pd.read_csv(paths[2])
        assert errors["status"].tolist() == ["verified"] * 4 + ["failed"]
        assert np.isnan(errors["error_m"].iloc[-1])

    def test_absent_mate(self):
        report = evaluate([ResultRecord(0.0, "failed", None, 0, 0)], [0.0], [_at(0.0)])
        assert report.mate_cm is None
        assert "mate_cm = absent" in report.summary_text()
        assert not report.passes(0.0, 100.0)


class TestRunEvaluation:
    def test_relocalization_records_are_reproducible(self, small_db, sim_run, small_config):
        first = run_relocalization(small_db, sim_run.query.frames, small_config, sim_run.scene.surfel_map)
        second = run_relocalization(small_db, sim_run.query.frames, small_config, sim_run.scene.surfel_map)
        lines = [format_result_record(ResultRecord.from_result(r)) for r in first]
        assert lines == [format_result_record(ResultRecord.from_result(r)) for r in second]
        report = evaluate_run(first, sim_run, small_config)
        assert report.queries == len(sim_run.query.frames)
        assert report.verified + report.unverified + report.failed == report.queries
