"""CSV and key-value persistence of trajectories and experiment results."""

import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Union

import pandas as pd

from src.control.closed_loop import RESULT_COLUMNS, ExperimentResult
from src.errors import ConfigError
from src.plant.trajectory import Trajectory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def write_trajectory(trajectory: Trajectory, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{trajectory.name}.csv"
    trajectory.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_trajectories(directory: Union[str, Path]) -> List[Trajectory]:
    """All trajectory CSVs in `directory`, sorted by file name."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise ConfigError(f"No trajectory files in {directory}; run `collect` first")
    trajectories = [Trajectory.from_frame(pd.read_csv(p, float_precision="round_trip"), name=p.stem)
                    for p in paths]
    logger.info(f"Loaded {len(trajectories)} trajectories from {directory}")
    return trajectories


def format_value(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return FLOAT_FORMAT % value
    return str(value)


def write_metrics(metrics: Mapping[str, object], path: Union[str, Path]) -> Path:
    """Flat `key = value` file, keys sorted."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {format_value(metrics[key])}" for key in sorted(metrics)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_metrics(path: Union[str, Path]) -> Dict[str, float]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Metrics file not found: {path}")
    metrics: Dict[str, float] = {}
    for line in path.read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"Malformed metrics line in {path}: '{line}'")
        try:
            metrics[key.strip()] = float(value.strip())
        except ValueError as e:
            raise ConfigError(f"Non-numeric metric '{key.strip()}' in {path}") from e
    return metrics


def write_result(result: ExperimentResult, directory: Union[str, Path]) -> Path:
    """Write `<name>.csv` and `<name>_metrics.txt`; returns the CSV path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{result.name}.csv"
    result.series[RESULT_COLUMNS].to_csv(csv_path, index=False, float_format=FLOAT_FORMAT)
    if result.metrics:
        write_metrics(result.metrics, directory / f"{result.name}_metrics.txt")
    logger.info(f"Wrote {csv_path}")
    return csv_path


def read_series(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Result file not found: {path}")
    series = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in RESULT_COLUMNS if c not in series.columns]
    if missing:
        raise ConfigError(f"{path} is missing columns {missing}")
    return series
