import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from cli.config import CLI_CONFIG
from cli.models import RunConfig
from surfelreloc.dataflows.config import merge_config
from surfelreloc.default_config import DEFAULT_CONFIG
from surfelreloc.simulation.presets import get_preset

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

console = Console()


class ConfigError(ValueError):
    """Raised for unreadable config files, bad overrides or invalid merged configs."""


def setup_logging(level: Optional[str] = None) -> None:
    """Route library loggers through rich; level from the environment unless given."""
    level = (level or os.getenv(CLI_CONFIG["log_level_env"], "INFO")).upper()
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )


def load_config_file(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"Invalid TOML in {path}: {exc}") from exc


def parse_override(item: str) -> Dict[str, Any]:
    """``section.key=value`` to a nested dict; the value is JSON when it parses, else a string."""
    key, sep, raw = item.partition("=")
    parts = [p for p in key.strip().split(".") if p]
    if not sep or not parts:
        raise ConfigError(f"Override must look like section.key=value, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out: Dict[str, Any] = {}
    node = out
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return out


def resolve_config(
    config_file: Optional[Path] = None,
    preset: Optional[str] = None,
    seed: Optional[int] = None,
    overrides: Optional[List[str]] = None,
) -> Dict[str, Any]:
    """Defaults, then preset, then file, then ``--set`` overrides, then ``--seed``; validated."""
    layers = []
    if preset:
        try:
            layers.append(get_preset(preset))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if config_file is not None:
        layers.append(load_config_file(config_file))
    layers.extend(parse_override(item) for item in overrides or [])
    if seed is not None:
        layers.append({"run": {"seed": seed}})
    merged = merge_config(DEFAULT_CONFIG, *layers)
    try:
        return RunConfig.model_validate(merged).model_dump(exclude_none=True)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration:\n{exc}") from exc


def results_dir(config: Dict[str, Any]) -> Path:
    return Path(config["run"]["results_dir"])


def artifact(config: Dict[str, Any], name: str) -> Path:
    return results_dir(config) / CLI_CONFIG[name]


def summary_table(title: str, rows: Dict[str, Any]) -> Table:
    table = Table(title=title, show_header=True, header_style="bold magenta")
    table.add_column("Item", style="cyan")
    table.add_column("Value", style="green", justify="right")
    for key, value in rows.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        table.add_row(str(key), "absent" if value is None else str(value))
    return table
