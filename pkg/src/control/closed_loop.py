"""
Sample-synchronous closed-loop runner.

Each sample is strictly sequential: measure, let the controller act, hold
the torque for one period. Controllers keep their own measurement history.
"""

import logging
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import Dict, Optional, Protocol

import numpy as np
import pandas as pd

from src.errors import InvalidInputError
from src.plant.session import PlantSession, Signal, zero_signal
from src.plant.tower import Measurement

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["t", "phi", "phi_dot", "r_phi", "u", "du", "solver_iters", "status", "d"]


@dataclass(frozen=True)
class ControlAction:
    u: float
    iterations: int = 0
    status: str = "open_loop"


class Controller(Protocol):
    name: str

    def reset(self) -> None:
        ...

    def observe(self, m: Measurement, u_prev: float) -> None:
        """Update history without computing an input."""
        ...

    def act(self, m: Measurement, u_prev: float, t: float) -> ControlAction:
        ...


class OpenLoop:
    """Plays a fixed torque signal."""

    def __init__(self, signal: Signal = zero_signal, name: str = "none"):
        self.signal = signal
        self.name = name

    def reset(self) -> None:
        pass

    def observe(self, m: Measurement, u_prev: float) -> None:
        pass

    def act(self, m: Measurement, u_prev: float, t: float) -> ControlAction:
        return ControlAction(u=float(self.signal(t)))


class Switched:
    """Runs `first` until t_switch, then `second`; `second` keeps observing meanwhile."""

    def __init__(self, first: Controller, second: Controller, t_switch: float):
        self.first = first
        self.second = second
        self.t_switch = t_switch
        self.name = second.name

    def reset(self) -> None:
        self.first.reset()
        self.second.reset()

    def observe(self, m: Measurement, u_prev: float) -> None:
        self.first.observe(m, u_prev)
        self.second.observe(m, u_prev)

    def act(self, m: Measurement, u_prev: float, t: float) -> ControlAction:
        # t accumulates dt, allow for rounding
        if t < self.t_switch - 1e-9:
            self.second.observe(m, u_prev)
            return self.first.act(m, u_prev, t)
        return self.second.act(m, u_prev, t)


@dataclass
class ExperimentResult:
    """Uniformly sampled closed-loop series plus summary metrics."""
    name: str
    series: pd.DataFrame
    dt: float
    metrics: Dict[str, float] = field(default_factory=dict)
    baseline: Optional["ExperimentResult"] = None

    def __len__(self) -> int:
        return len(self.series)


def run_closed_loop(session: PlantSession,
                    controller: Controller,
                    duration: float,
                    reference: Signal = zero_signal,
                    name: str = "run",
                    monitor=None) -> ExperimentResult:
    """Run `controller` on `session` for `duration` seconds.

    Args:
        session: Plant session, advanced in place
        controller: Controller under test
        duration: Simulated time (s)
        reference: phi reference (rad) logged as r_phi
        name: Result name
        monitor: Optional LoopMonitor timing each controller step

    Returns:
        ExperimentResult with one row per sample
    """
    dt = session.params.dt
    steps = int(round(duration / dt))
    if steps < 1:
        raise InvalidInputError(f"duration {duration}s is shorter than one sample")

    limit = session.params.torque_limit
    rows = np.zeros((steps, len(RESULT_COLUMNS) - 1))
    statuses = []
    u_prev = 0.0
    controller.reset()

    for k in range(steps):
        t = session.t
        m = session.measure()
        tracker = monitor.track_operation("controller_step") if monitor is not None else nullcontext()
        with tracker:
            action = controller.act(m, u_prev, t)
        u = float(np.clip(action.u, -limit, limit))
        d = session.apply(u)
        rows[k] = (t, m.phi, m.phi_dot, reference(t), u, u - u_prev, action.iterations, d)
        statuses.append(action.status)
        u_prev = u

    numeric = [c for c in RESULT_COLUMNS if c != "status"]
    series = pd.DataFrame(rows, columns=numeric)
    series["solver_iters"] = series["solver_iters"].astype(int)
    series["status"] = statuses
    series = series[RESULT_COLUMNS]
    logger.info(f"Run '{name}' with controller '{controller.name}': {steps} samples, "
                f"max |phi| = {np.max(np.abs(series['phi'])):.4f} rad")
    return ExperimentResult(name=name, series=series, dt=dt)
