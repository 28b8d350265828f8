"""Summary metrics of closed-loop series."""

import logging
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from src.errors import InvalidInputError

logger = logging.getLogger(__name__)

SETTLING_BAND = 0.02


def settling_time(t: np.ndarray,
                  error: np.ndarray,
                  band: float = SETTLING_BAND,
                  peak: Optional[float] = None) -> float:
    """Time from t[0] until |error| stays within `band` times `peak`.

    `peak` defaults to the largest |error| in the window. Returns 0 for an
    identically zero error and inf when the last sample is still outside the band.
    """
    magnitude = np.abs(np.asarray(error, dtype=float))
    if not np.any(magnitude):
        return 0.0
    peak = float(np.max(magnitude)) if peak is None else float(peak)
    outside = np.flatnonzero(magnitude > band * peak)
    if len(outside) == 0:
        return 0.0
    last = outside[-1]
    if last == len(magnitude) - 1:
        return float("inf")
    return float(t[last + 1] - t[0])


def last_disturbance_time(series: pd.DataFrame) -> float:
    """First sample after the last nonzero disturbance, or the first sample."""
    active = np.flatnonzero(series["d"].to_numpy() != 0.0)
    if len(active) == 0:
        return float(series["t"].iloc[0])
    idx = min(active[-1] + 1, len(series) - 1)
    return float(series["t"].iloc[idx])


def compute_metrics(series: pd.DataFrame,
                    dt: float,
                    settle_from: Optional[float] = None,
                    warmup: float = 0.0,
                    transients: Sequence[float] = ()) -> Dict[str, float]:
    """Settling time, peak tilt, RMS tracking error and control effort.

    Args:
        series: Closed-loop series with the result columns
        dt: Sample period
        settle_from: Start of the settling window; defaults to just after the
            last disturbance sample
        warmup: RMS error only counts samples with t >= warmup and, for every
            time in `transients`, skips the following `warmup` seconds
        transients: Times of reference changes

    The settling band is 2% of the largest |phi| over the whole series.

    Raises:
        InvalidInputError: empty series
    """
    if len(series) == 0:
        raise InvalidInputError("Cannot compute metrics of an empty series")

    t = series["t"].to_numpy()
    phi = series["phi"].to_numpy()
    error = phi - series["r_phi"].to_numpy()
    u = series["u"].to_numpy()

    start = last_disturbance_time(series) if settle_from is None else settle_from
    window = t >= start - 1e-9
    peak_phi = float(np.max(np.abs(phi)))
    if np.any(window):
        settle = settling_time(t[window], error[window], peak=peak_phi)
    else:
        settle = float("inf")

    post = t >= warmup - 1e-9
    for change in transients:
        post &= ~((t >= change - 1e-9) & (t < change + warmup - 1e-9))
    rms = float(np.sqrt(np.mean(error[post] ** 2))) if np.any(post) else float("nan")

    metrics = {
        "settling_time": settle,
        "peak_abs_phi": peak_phi,
        "rms_error": rms,
        "control_effort": float(np.sum(u ** 2) * dt),
        "max_abs_u": float(np.max(np.abs(u))),
    }
    if "status" in series:
        metrics["degraded_steps"] = int(np.sum(series["status"] == "max_iter"))
    if "solver_iters" in series:
        metrics["mean_solver_iters"] = float(series["solver_iters"].mean())
    return metrics
