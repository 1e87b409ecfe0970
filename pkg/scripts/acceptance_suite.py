#!/usr/bin/env python3
"""
Acceptance studies on simulated scenes

Runs the comparative experiments and checks their directional claims:
- noiseless end-to-end relocalization in the room preset
- database pose noise before and after surfel optimization
- full / visible-only / naive matching ablation on degraded observations
- pose verification on the twin-room aliasing suite
- bounded database growth over repeated loops
- byte-identical result records across two runs
"""
import json
import time
from pathlib import Path
from typing import Dict, Optional

import pandas as pd
import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.table import Table

# Load environment variables
load_dotenv()

from surfelreloc.dataflows.config import merge_config
from surfelreloc.default_config import DEFAULT_CONFIG
from surfelreloc.evaluation.experiments import (
    ablation_study,
    aliasing_study,
    build_database,
    evaluate_run,
    growth_study,
    optimize_database,
    pose_noise_study,
    run_relocalization,
)
from surfelreloc.evaluation.records import ResultRecord, format_result_record
from surfelreloc.simulation.session import simulate

console = Console()
app = typer.Typer(name="acceptance-suite", help="Acceptance studies for surfelreloc", add_completion=False)

OutputOption = typer.Option(Path("./results/acceptance"), "--output", "-o", help="Directory for study tables")
SeedsOption = typer.Option(10, "--seeds", help="Number of seeds averaged per study")


def _verdict(name: str, passed: bool, detail: str) -> bool:
    colour = "green" if passed else "red"
    console.print(f"[{colour}]{'PASS' if passed else 'FAIL'}[/{colour}] {name}: {detail}")
    return passed


def _save(frame: pd.DataFrame, output: Path, name: str) -> None:
    output.mkdir(parents=True, exist_ok=True)
    frame.to_csv(output / name, index=False, float_format="%.6f")


def _show(title: str, frame: pd.DataFrame) -> None:
    table = Table(title=title, header_style="bold magenta")
    for col in frame.columns:
        table.add_column(str(col), justify="right")
    for row in frame.itertuples(index=False):
        table.add_row(*(f"{v:.4g}" if isinstance(v, float) else str(v) for v in row))
    console.print(table)


def check_end_to_end(seed: int = 0) -> bool:
    config = merge_config(DEFAULT_CONFIG, {"run": {"seed": seed}})
    run = simulate(config)
    db, _ = build_database(run.database.frames, run.database.reported_poses, run.scene.surfel_map, run.camera, config)
    optimize_database(db, run.scene.surfel_map, config)
    start = time.perf_counter()
    results = run_relocalization(db, run.query.frames, config)
    per_query_ms = (time.perf_counter() - start) * 1e3 / max(len(results), 1)
    report = evaluate_run(results, run, config)
    passed = report.recall >= 0.99 and report.mate_cm is not None and report.mate_cm < 1.0 and per_query_ms < 100.0
    return _verdict(
        "noiseless end-to-end",
        passed,
        f"recall {report.recall:.3f}, mATE {report.mate_cm} cm, {per_query_ms:.1f} ms/query",
    )


def check_pose_noise(seeds: int, output: Path) -> bool:
    frame = pose_noise_study(DEFAULT_CONFIG, sigma=0.2, seeds=range(seeds))
    _save(frame, output, "pose_noise.csv")
    _show("Database pose noise (sigma 0.2 m)", frame)
    means = frame[["recall_before", "recall_after", "mate_before_cm", "mate_after_cm"]].mean()
    passed = means.mate_after_cm <= 0.8 * means.mate_before_cm and means.recall_after >= means.recall_before
    return _verdict(
        "surfel optimization",
        bool(passed),
        f"mATE {means.mate_before_cm:.2f} -> {means.mate_after_cm:.2f} cm, "
        f"recall {means.recall_before:.3f} -> {means.recall_after:.3f}",
    )


def check_ablation(seeds: int, output: Path) -> bool:
    frame = ablation_study(DEFAULT_CONFIG, seeds=range(seeds))
    _save(frame, output, "ablation.csv")
    _show("Matching ablation", frame)
    m = frame[["full", "visible", "naive"]].mean()
    passed = m.full - m.visible >= 0.02 and m.visible - m.naive >= 0.02
    return _verdict("ablation", bool(passed), f"full {m.full:.3f} >= visible {m.visible:.3f} >= naive {m.naive:.3f}")


def check_aliasing(output: Path, seed: int = 0) -> bool:
    pr_on, pr_off, (weak, strict) = aliasing_study(seed=seed)
    _save(pr_on, output, "pr_verification_on.csv")
    _save(pr_off, output, "pr_verification_off.csv")
    return _verdict("pose verification", weak and strict, f"weak dominance {weak}, strict somewhere {strict}")


def check_growth(seed: int = 0) -> bool:
    counts = growth_study(seed=seed)
    return _verdict(
        "bounded growth",
        counts["ratio"] <= 1.15,
        f"{counts['one_loop']} -> {counts['two_loops']} keyframes (x{counts['ratio']:.3f})",
    )


def check_determinism(seed: int = 42) -> bool:
    def records() -> str:
        config = merge_config(DEFAULT_CONFIG, {"run": {"seed": seed}})
        run = simulate(config)
        db, _ = build_database(run.database.frames, run.database.reported_poses, run.scene.surfel_map, run.camera, config)
        optimize_database(db, run.scene.surfel_map, config)
        results = run_relocalization(db, run.query.frames, config)
        return "\n".join(format_result_record(ResultRecord.from_result(r)) for r in results)

    return _verdict("determinism", records() == records(), "result records of two identical runs compared")


@app.command()
def run(
    output: Path = OutputOption,
    seeds: int = SeedsOption,
    only: Optional[str] = typer.Option(
        None, "--only", help="One of end-to-end, pose-noise, ablation, aliasing, growth, determinism"
    ),
):
    """Run the acceptance studies and exit non-zero when any check fails."""
    checks = {
        "end-to-end": lambda: check_end_to_end(),
        "pose-noise": lambda: check_pose_noise(seeds, output),
        "ablation": lambda: check_ablation(seeds, output),
        "aliasing": lambda: check_aliasing(output),
        "growth": lambda: check_growth(),
        "determinism": lambda: check_determinism(),
    }
    if only is not None and only not in checks:
        console.print(f"[red]Unknown study {only!r}; choose from {', '.join(checks)}[/red]")
        raise typer.Exit(code=1)
    outcome: Dict[str, bool] = {}
    for name, check in checks.items():
        if only is None or name == only:
            console.rule(name)
            outcome[name] = check()
    output.mkdir(parents=True, exist_ok=True)
    (output / "acceptance.json").write_text(json.dumps(outcome, indent=2) + "\n")
    if not all(outcome.values()):
        raise typer.Exit(code=2)


if __name__ == "__main__":
    app()
