import json

import pytest
from typer.testing import CliRunner

from cli.config import CLI_CONFIG
from cli.main import app
from cli.utils import ConfigError, load_config_file, parse_override, resolve_config
from surfelreloc.dataflows.trajectory_io import read_trajectory
from surfelreloc.evaluation.records import ResultRecord, write_result_records

runner = CliRunner()

SMALL_TOML = """
[run]
seed = 5
results_dir = "{results}"

[scene]
landmark_density = 20.0

[descriptor]
vocab_size = 16

[[trajectory.database]]
kind = "circle"
frames = 12
radius = 0.5
center = [2.0, 2.0]

[[trajectory.query]]
kind = "circle"
frames = 6
radius = 0.6
center = [2.0, 2.0]
phase = 0.1
"""

COMMANDS = ["simulate", "build-db", "optimize-db", "relocalize", "eval"]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """The five commands run once in order over a small room."""
    root = tmp_path_factory.mktemp("cli")
    results = root / "results"
    config = root / "small.toml"
    config.write_text(SMALL_TOML.format(results=results.as_posix()))
    outcomes = {name: runner.invoke(app, [name, "--config", str(config)]) for name in COMMANDS}
    return config, results, outcomes


class TestOverrides:
    @pytest.mark.parametrize(
        "item, expected",
        [
            ("reloc.n_max=5", {"reloc": {"n_max": 5}}),
            ("reloc.mode=visible", {"reloc": {"mode": "visible"}}),
            ("reloc.use_essential=false", {"reloc": {"use_essential": False}}),
            ("trajectory.query=[]", {"trajectory": {"query": []}}),
        ],
    )
    def test_parse_override(self, item, expected):
        assert parse_override(item) == expected

    @pytest.mark.parametrize("item", ["reloc.n_max", "=5", ".=1"])
    def test_malformed_override(self, item):
        with pytest.raises(ConfigError, match="section.key=value"):
            parse_override(item)


class TestResolveConfig:
    def test_layers_apply_in_order(self):
        cfg = resolve_config(preset="corridor", seed=9, overrides=["scene.length=10", "run.seed=1"])
        assert cfg["scene"]["kind"] == "corridor"
        assert cfg["scene"]["length"] == 10.0
        # --seed wins over --set run.seed
        assert cfg["run"]["seed"] == 9
        assert cfg["trajectory"]["database"][0]["kind"] == "lawnmower"

    def test_config_file_sits_between_preset_and_overrides(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text('[reloc]\nmode = "visible"\nn_max = 2\n')
        cfg = resolve_config(path, "room", None, ["reloc.n_max=4"])
        assert cfg["reloc"]["mode"] == "visible"
        assert cfg["reloc"]["n_max"] == 4

    @pytest.mark.parametrize(
        "overrides",
        [["scene.colour=red"], ["reloc.n_max=0"], ["reloc.mode=fast"], ["trajectory.query=[]"], ["unknown.key=1"]],
    )
    def test_invalid_configs(self, overrides):
        with pytest.raises(ConfigError, match="Invalid configuration"):
            resolve_config(overrides=overrides)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="Unknown preset"):
            resolve_config(preset="forest")

    def test_config_file_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config_file(tmp_path / "absent.toml")
        bad = tmp_path / "bad.toml"
        bad.write_text("[reloc\n")
        with pytest.raises(ConfigError, match="Invalid TOML"):
            load_config_file(bad)


class TestCommandErrors:
    def test_bad_override_exits_with_one(self, tmp_path):
        result = runner.invoke(app, ["simulate", "--set", "nonsense", "--set", f"run.results_dir={tmp_path}"])
        assert result.exit_code == 1
        assert "Error" in result.output
        assert list(tmp_path.iterdir()) == []

    def test_missing_database(self, tmp_path):
        result = runner.invoke(app, ["relocalize", "--set", f"run.results_dir={tmp_path}"])
        assert result.exit_code == 1


@pytest.mark.slow
class TestPipeline:
    def test_every_command_succeeds(self, pipeline):
        _, _, outcomes = pipeline
        for name in COMMANDS[:-1]:
            assert outcomes[name].exit_code == 0, outcomes[name].output
        assert outcomes["eval"].exit_code in (0, 2)

    def test_artifacts_and_manifest(self, pipeline):
        _, results, _ = pipeline
        for key in ("surfel_map", "db_features", "query_ground_truth", "database", "results", "reloc_traces"):
            assert (results / CLI_CONFIG[key]).exists()
        assert len((results / "frame_reports.jsonl").read_text().splitlines()) == 12
        assert len((results / "results.txt").read_text().splitlines()) == 6
        manifest = json.loads((results / "manifest.json").read_text())
        assert sorted(manifest["commands"]) == sorted(COMMANDS)
        assert manifest["commands"]["simulate"]["seed"] == 5
        assert "database.vsdb" in manifest["commands"]["build-db"]["artifacts"]
        report = json.loads((results / "optimization_report.json").read_text())
        assert {"status", "max_pose_update", "refreshed_points"} <= set(report)
        assert (results / "eval" / "pr_curve.csv").exists()

    def test_existing_artifacts_need_force(self, pipeline):
        config, _, _ = pipeline
        for args in (["simulate"], ["optimize-db"], ["build-db", "--rebuild"]):
            result = runner.invoke(app, [*args, "--config", str(config)])
            assert result.exit_code == 1
            assert "Error" in result.output

    def test_relocalization_is_reproducible(self, pipeline):
        config, results, _ = pipeline
        before = (results / "results.txt").read_bytes()
        result = runner.invoke(app, ["relocalize", "--config", str(config), "--force"])
        assert result.exit_code == 0, result.output
        assert (results / "results.txt").read_bytes() == before

    def test_failing_gates_exit_with_two(self, pipeline, tmp_path):
        config, results, _ = pipeline
        timestamps, _ = read_trajectory(results / "query_trajectory.txt")
        failed = tmp_path / "failed.txt"
        write_result_records(failed, [ResultRecord(float(t), "failed", None, 0, 0) for t in timestamps])
        result = runner.invoke(app, ["eval", "--config", str(config), "--results", str(failed), "--force"])
        assert result.exit_code == 2
        assert "recall = 0.000000" in (results / "eval" / "eval_summary.txt").read_text()
