import json
from functools import wraps
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from tqdm import tqdm

# Load environment variables from .env file
load_dotenv()

from cli.models import Preset
from cli.stats_handler import RelocStatsHandler
from cli.utils import ConfigError, artifact, resolve_config, setup_logging, summary_table
from surfelreloc import __version__
from surfelreloc.dataflows.database_io import load_database, save_database
from surfelreloc.dataflows.feature_io import load_features, save_features
from surfelreloc.dataflows.trajectory_io import read_trajectory, write_trajectory
from surfelreloc.dataflows.utils import append_jsonl, check_collisions, sha256_file, write_json
from surfelreloc.evaluation.experiments import build_database, optimize_database, run_relocalization
from surfelreloc.evaluation.records import ResultRecord, load_result_records, write_result_records
from surfelreloc.evaluation.report import evaluate
from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.mapping.states import stage_summary
from surfelreloc.mapping.surfel_map import load_surfel_map
from surfelreloc.simulation.ground_truth import load_ground_truth, save_ground_truth
from surfelreloc.simulation.session import simulate as simulate_run

console = Console()

app = typer.Typer(
    name="surfelreloc",
    help="surfelreloc CLI: visual database building and relocalization against a surfel map",
    add_completion=True,  # Enable shell completion
)

TIMESTAMP_TOLERANCE = 1e-6

ConfigOption = typer.Option(None, "--config", "-c", help="TOML config file merged over the defaults")
SeedOption = typer.Option(None, "--seed", help="Global seed (overrides run.seed)")
ForceOption = typer.Option(False, "--force", help="Overwrite existing artifacts")
PresetOption = typer.Option(None, "--preset", help="Named experiment setup applied before the config file")
SetOption = typer.Option(None, "--set", help="Override as section.key=value, repeatable")


@app.callback()
def main() -> None:
    setup_logging()


def handle_errors(func):
    """Turn domain errors into a red message and exit code 1."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ConfigError, ValueError, LookupError, OSError) as exc:
            console.print(f"[red]Error:[/red] {exc}")
            raise typer.Exit(code=1)

    return wrapper


def _config(config: Optional[Path], preset: Optional[Preset], seed: Optional[int], overrides: Optional[List[str]]) -> Dict[str, Any]:
    return resolve_config(config, preset.value if preset else None, seed, overrides)


def _progress(desc: str, total: int):
    return lambda it: tqdm(it, desc=desc, total=total, unit="frame", leave=False)


def _update_manifest(config: Dict[str, Any], command: str, paths: List[Path]) -> Path:
    """Record the command's config, seed and artifact checksums next to earlier entries."""
    manifest_path = artifact(config, "manifest")
    manifest = {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    manifest["version"] = __version__
    manifest.setdefault("commands", {})[command] = {
        "seed": config["run"]["seed"],
        "config": config,
        "artifacts": {p.name: sha256_file(p) for p in paths if p.exists()},
    }
    write_json(manifest_path, manifest)
    return manifest_path


def _announce(title: str, paths: List[Path], rows: Dict[str, Any]) -> None:
    body = "\n".join(f"[cyan]{p}[/cyan]" for p in paths)
    console.print(Panel(body, title=f"[bold green]{title}[/bold green]", border_style="green", padding=(1, 2)))
    console.print(summary_table("Summary", rows))


def _check_alignment(feature_ts: np.ndarray, pose_ts: np.ndarray, what: str) -> None:
    if feature_ts.shape[0] != pose_ts.shape[0]:
        raise ValueError(f"{what}: {feature_ts.shape[0]} frames but {pose_ts.shape[0]} poses")
    if feature_ts.size and np.max(np.abs(feature_ts - pose_ts)) > TIMESTAMP_TOLERANCE:
        raise ValueError(f"{what}: frame and pose timestamps do not align")


@app.command()
@handle_errors
def simulate(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    force: bool = ForceOption,
    preset: Optional[Preset] = PresetOption,
    overrides: Optional[List[str]] = SetOption,
):
    """Generate a scene, its surfel map and the database and query sequences."""
    cfg = _config(config, preset, seed, overrides)
    names = [
        "surfel_map",
        "db_features",
        "db_trajectory",
        "db_ground_truth",
        "query_features",
        "query_trajectory",
        "query_ground_truth",
    ]
    paths = {name: artifact(cfg, name) for name in names}
    check_collisions(paths.values(), force)

    run = simulate_run(cfg)
    meta = {"seed": cfg["run"]["seed"], "camera": run.camera.to_dict()}
    run.scene.surfel_map.save(paths["surfel_map"])
    save_features(paths["db_features"], run.database.frames, {**meta, "role": "database"})
    # the mapping side only ever sees the reported (possibly perturbed) poses
    write_trajectory(paths["db_trajectory"], run.database.timestamps, run.database.reported_poses)
    save_ground_truth(paths["db_ground_truth"], run.database.ground_truth)
    save_features(paths["query_features"], run.query.frames, {**meta, "role": "query"})
    write_trajectory(paths["query_trajectory"], run.query.timestamps, run.query.poses)
    save_ground_truth(paths["query_ground_truth"], run.query.ground_truth)

    manifest = _update_manifest(cfg, "simulate", list(paths.values()))
    _announce(
        "Simulation",
        [*paths.values(), manifest],
        {
            "scene": run.scene.spec.kind,
            "seed": cfg["run"]["seed"],
            "surfels": len(run.scene.surfel_map),
            "landmarks": int(run.scene.landmarks.positions.shape[0]),
            "database frames": len(run.database.frames),
            "query frames": len(run.query.frames),
        },
    )


@app.command("build-db")
@handle_errors
def build_db(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    force: bool = ForceOption,
    preset: Optional[Preset] = PresetOption,
    overrides: Optional[List[str]] = SetOption,
    features: Optional[Path] = typer.Option(None, "--features", help="Observation file (default: simulated database frames)"),
    trajectory: Optional[Path] = typer.Option(None, "--trajectory", help="Pose file matching the observations"),
    rebuild: bool = typer.Option(False, "--rebuild", help="Start a new database even if one exists"),
):
    """Insert posed frames into the visual database, updating it when it already exists."""
    cfg = _config(config, preset, seed, overrides)
    db_path = artifact(cfg, "database")
    reports_path = artifact(cfg, "frame_reports")
    if rebuild:
        check_collisions([db_path, reports_path], force)

    surfel_map = load_surfel_map(artifact(cfg, "surfel_map"))
    frames = load_features(features or artifact(cfg, "db_features"))
    timestamps, poses = read_trajectory(trajectory or artifact(cfg, "db_trajectory"))
    if not frames:
        raise ValueError("The observation file holds no frames")
    _check_alignment(np.array([f.timestamp for f in frames]), np.asarray(timestamps), "build-db")

    db = None
    if db_path.exists() and not rebuild:
        db = load_database(db_path)
        console.print(f"[yellow]Updating existing database ({len(db)} keyframes)[/yellow]")
    elif rebuild:
        reports_path.unlink(missing_ok=True)
    camera = PinholeCamera(**cfg["camera"])
    db, reports = build_database(
        frames, poses, surfel_map, camera, cfg, db=db, progress=_progress("build-db", len(frames))
    )
    save_database(db_path, db)
    append_jsonl(reports_path, reports)

    manifest = _update_manifest(cfg, "build-db", [db_path, reports_path])
    _announce("Visual database", [db_path, reports_path, manifest], {**stage_summary(reports), **db.stats()})


@app.command("optimize-db")
@handle_errors
def optimize_db(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    force: bool = ForceOption,
    preset: Optional[Preset] = PresetOption,
    overrides: Optional[List[str]] = SetOption,
):
    """Refine keyframe poses with surfel reprojection constraints and refresh map points."""
    cfg = _config(config, preset, seed, overrides)
    db_path = artifact(cfg, "database")
    report_path = artifact(cfg, "optimization_report")
    cost_path = artifact(cfg, "optimization_cost")
    check_collisions([report_path, cost_path], force)

    db = load_database(db_path)
    surfel_map = load_surfel_map(artifact(cfg, "surfel_map"))
    report, refresh = optimize_database(db, surfel_map, cfg)
    payload = report.to_dict()
    payload["refreshed_points"] = refresh.updated if refresh else 0
    payload["degenerate_points"] = refresh.degenerate if refresh else 0
    write_json(report_path, payload)
    report.write_cost_csv(cost_path)

    if not report.success:
        console.print(
            f"[yellow]Optimization {report.status}: database left unchanged "
            f"({report.residual_count} usable factors, {report.skipped_residuals} skipped)[/yellow]"
        )
        paths = [report_path, cost_path]
    else:
        save_database(db_path, db)
        paths = [db_path, report_path, cost_path]
    manifest = _update_manifest(cfg, "optimize-db", paths)
    _announce(
        "Surfel optimization",
        [*paths, manifest],
        {
            "status": report.status,
            "initial cost": report.initial_cost,
            "final cost": report.final_cost,
            "iterations": report.iterations,
            "factors": report.residual_count,
            "skipped factors": report.skipped_residuals,
            "max pose update (m)": payload["max_pose_update"],
            "refreshed points": payload["refreshed_points"],
        },
    )


@app.command()
@handle_errors
def relocalize(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    force: bool = ForceOption,
    preset: Optional[Preset] = PresetOption,
    overrides: Optional[List[str]] = SetOption,
    queries: Optional[Path] = typer.Option(None, "--queries", help="Query observation file (default: simulated queries)"),
):
    """Relocalize every query in order, threading the last-inlier-pose state."""
    cfg = _config(config, preset, seed, overrides)
    results_path = artifact(cfg, "results")
    traces_path = artifact(cfg, "reloc_traces")
    check_collisions([results_path, traces_path], force)

    db = load_database(artifact(cfg, "database"))
    frames = load_features(queries or artifact(cfg, "query_features"))
    surfel_map = load_surfel_map(artifact(cfg, "surfel_map")) if cfg["reloc"]["mode"] == "naive" else None

    results = run_relocalization(db, frames, cfg, surfel_map, progress=_progress("relocalize", len(frames)))
    stats = RelocStatsHandler()
    for result in results:
        stats.on_result(result)
    write_result_records(results_path, [ResultRecord.from_result(r) for r in results])
    traces_path.unlink(missing_ok=True)
    append_jsonl(traces_path, (r.diagnostics for r in results if r.diagnostics is not None))

    manifest = _update_manifest(cfg, "relocalize", [results_path, traces_path])
    _announce("Relocalization", [results_path, traces_path, manifest], {"mode": cfg["reloc"]["mode"], **stats.get_stats()})


@app.command("eval")
@handle_errors
def eval_command(
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    force: bool = ForceOption,
    preset: Optional[Preset] = PresetOption,
    overrides: Optional[List[str]] = SetOption,
    results: Optional[Path] = typer.Option(None, "--results", help="Result records (default: relocalize output)"),
    ground_truth: Optional[Path] = typer.Option(None, "--ground-truth", help="Query ground-truth sidecar"),
):
    """Recall, mATE and precision-recall curves; exit code 2 when the eval gates fail."""
    cfg = _config(config, preset, seed, overrides)
    out_dir = artifact(cfg, "eval_dir")
    check_collisions([out_dir / "eval_summary.txt", out_dir / "pr_curve.csv", out_dir / "query_errors.csv"], force)

    records = load_result_records(results or artifact(cfg, "results"))
    gt = load_ground_truth(ground_truth or artifact(cfg, "query_ground_truth"))
    report = evaluate(records, gt.timestamps, gt.poses, cfg["reloc"]["recall_threshold"], cfg["reloc"]["verify_distance"])
    paths = report.write(out_dir)

    manifest = _update_manifest(cfg, "eval", paths)
    _announce("Evaluation", [*paths, manifest], report.summary())
    gates = cfg["eval"]
    if not report.passes(gates["min_recall"], gates["max_mate_cm"]):
        console.print(
            f"[red]Acceptance gates not met: recall >= {gates['min_recall']} and mATE <= {gates['max_mate_cm']} cm[/red]"
        )
        raise typer.Exit(code=2)
    console.print("[bold green]Acceptance gates met[/bold green]")


if __name__ == "__main__":
    app()
