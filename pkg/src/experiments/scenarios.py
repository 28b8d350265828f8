"""
Scenario definitions, training-data collection and closed-loop runs on the
simulated tower.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.control.closed_loop import Controller, ExperimentResult, OpenLoop, Switched, run_closed_loop
from src.control.kmpc import KmpcController
from src.control.lqr import LqrController
from src.errors import (
    ConfigError,
    DegenerateDataError,
    DimensionMismatchError,
    EmptyDatasetError,
    NumericalBlowupError,
)
from src.experiments.config import RunConfig, ScenarioSettings
from src.experiments.excitation import EXCITATIONS, excitation
from src.experiments.metrics import compute_metrics
from src.experiments.storage import write_metrics, write_result, write_trajectory
from src.identification.edmd import LiftedPredictor
from src.identification.predictor_io import load_predictor
from src.plant.session import PlantSession, Signal, zero_signal
from src.plant.tower import PlantParams, TowerState, simulate, tilted_state
from src.plant.trajectory import Trajectory

logger = logging.getLogger(__name__)


def constant_signal(value: float) -> Signal:
    return lambda t: value


def pulse_signal(times: Sequence[float], width: float, amplitude: float) -> Signal:
    """Rectangular pulses of `width` seconds starting at each of `times`."""
    starts = np.asarray(times, dtype=float)

    def signal(t: float) -> float:
        active = np.any((t >= starts - 1e-9) & (t < starts + width - 1e-9))
        return amplitude if active else 0.0
    return signal


def sine_signal(amplitude: float, frequency: float) -> Signal:
    return lambda t: amplitude * float(np.sin(2 * np.pi * frequency * t))


def step_reference(times: Sequence[float], levels: Sequence[float]) -> Signal:
    """Piecewise-constant reference: levels[i] from times[i] on, zero before times[0]."""
    times = np.asarray(times, dtype=float)
    levels = np.asarray(levels, dtype=float)

    def signal(t: float) -> float:
        idx = np.searchsorted(times, t + 1e-9, side="right") - 1
        return float(levels[idx]) if idx >= 0 else 0.0
    return signal


def ramp_reference(times: Sequence[float], levels: Sequence[float]) -> Signal:
    """Piecewise-linear reference through (times[i], levels[i]), held outside."""
    times = np.asarray(times, dtype=float)
    levels = np.asarray(levels, dtype=float)
    return lambda t: float(np.interp(t, times, levels))


@dataclass
class ScenarioPlan:
    """Initial condition, signals and metric windows of one scenario."""
    name: str
    initial: TowerState
    duration: float
    disturbance: Signal = zero_signal
    input_disturbance: Signal = zero_signal
    reference: Signal = zero_signal
    excitation: Optional[Signal] = None
    switch_time: Optional[float] = None
    settle_from: Optional[float] = None
    warmup: float = 0.0
    transients: Tuple[float, ...] = ()


def plan_scenario(settings: ScenarioSettings, params: PlantParams) -> ScenarioPlan:
    """Translate scenario settings into signals."""
    name = settings.name
    rest = TowerState.at_rest(params)
    offset = settings.input_disturbance

    if name == "initial_tilt":
        return ScenarioPlan(name=name, initial=tilted_state(params, settings.initial_tilt),
                            duration=settings.duration, input_disturbance=constant_signal(offset),
                            settle_from=0.0)

    if name == "excite_then_damp":
        return ScenarioPlan(name=name, initial=rest, duration=settings.duration,
                            input_disturbance=constant_signal(offset),
                            excitation=sine_signal(settings.excitation_amplitude,
                                                   settings.excitation_frequency),
                            switch_time=settings.switch_time, settle_from=settings.switch_time)

    if name == "pulse_disturbance":
        pulses = pulse_signal(settings.pulse_times, settings.pulse_width, settings.pulse_amplitude)
        settle_from = max(settings.pulse_times) + settings.pulse_width
        if settings.pulse_channel == "top":
            return ScenarioPlan(name=name, initial=rest, duration=settings.duration,
                                disturbance=pulses, input_disturbance=constant_signal(offset),
                                settle_from=settle_from)
        return ScenarioPlan(name=name, initial=rest, duration=settings.duration,
                            input_disturbance=lambda t: offset + pulses(t),
                            settle_from=settle_from)

    if name in ("step_tracking", "ramp_tracking"):
        shape = step_reference if name == "step_tracking" else ramp_reference
        return ScenarioPlan(name=name, initial=rest, duration=settings.duration,
                            input_disturbance=constant_signal(offset),
                            reference=shape(settings.reference_times, settings.reference_levels),
                            warmup=settings.warmup,
                            transients=tuple(settings.reference_times))

    raise ConfigError(f"Scenario '{name}' is not a closed-loop scenario")


def build_controller(kind: str,
                     config: RunConfig,
                     predictor: Optional[LiftedPredictor] = None,
                     K: Optional[np.ndarray] = None,
                     reference: Signal = zero_signal) -> Controller:
    limit = config.plant.torque_limit
    if kind == "none":
        return OpenLoop(zero_signal, name="none")
    if predictor is None:
        raise ConfigError(f"Controller '{kind}' needs an identified predictor")
    if kind == "lqr":
        if K is None:
            raise ConfigError("No LQR gain available; run `design-lqr` first")
        return LqrController(K, predictor.spec, limit)
    if kind == "kmpc":
        cfg = config.kmpc.to_config(limit)
        return KmpcController(predictor, cfg, reference=reference,
                              settings=config.kmpc.qp_settings())
    raise ConfigError(f"Unknown controller '{kind}'")


def run_plan(plan: ScenarioPlan,
             config: RunConfig,
             controller: Controller,
             name: str,
             monitor=None) -> ExperimentResult:
    """One closed-loop run of `plan` with `controller`, metrics attached."""
    if plan.excitation is not None:
        controller = Switched(OpenLoop(plan.excitation, name="excitation"), controller,
                              plan.switch_time)
    session = PlantSession(
        params=config.plant,
        state=plan.initial,
        disturbance=plan.disturbance,
        input_disturbance=plan.input_disturbance,
        noise_amplitude=config.noise.amplitude,
        seed=config.run.seed,
    )
    result = run_closed_loop(session, controller, plan.duration, reference=plan.reference,
                             name=name, monitor=monitor)
    result.metrics = compute_metrics(result.series, result.dt, plan.settle_from, plan.warmup,
                                     plan.transients)
    return result


def load_artifacts(config: RunConfig):
    """Predictor and optional LQR gain from the output directory."""
    path = config.predictor_path
    if not path.exists():
        raise ConfigError(f"Predictor file {path} not found; run `identify` first")
    predictor, extras = load_predictor(path)
    if predictor.spec.delays != config.lifting.delays:
        raise DimensionMismatchError(
            f"Predictor uses delays={predictor.spec.delays}, config says {config.lifting.delays}"
        )
    return predictor, extras.get("K")


def run_scenario(config: RunConfig,
                 predictor: Optional[LiftedPredictor] = None,
                 K: Optional[np.ndarray] = None,
                 write: bool = True,
                 monitor=None) -> ExperimentResult:
    """Run the configured scenario with the configured controller.

    When `scenario.compare_uncontrolled` is set and a controller is selected,
    the uncontrolled run is attached as `result.baseline`.

    Args:
        config: Run configuration
        predictor: Predictor to use; loaded from the output directory when None
        K: LQR gain; taken from the predictor file when None
        write: Write CSV and metrics files to the output directory
        monitor: Optional LoopMonitor

    Returns:
        ExperimentResult of the controlled run
    """
    kind = config.run.controller
    plan = plan_scenario(config.scenario, config.plant)

    if kind != "none" and predictor is None:
        predictor, stored_K = load_artifacts(config)
        K = stored_K if K is None else K

    controller = build_controller(kind, config, predictor, K, plan.reference)
    result = run_plan(plan, config, controller, name=f"{plan.name}_{kind}", monitor=monitor)

    if kind != "none" and config.scenario.compare_uncontrolled:
        result.baseline = run_plan(plan, config, build_controller("none", config),
                                   name=f"{plan.name}_none")
        logger.info(
            f"{plan.name}: settling {result.metrics['settling_time']:.3f}s ({kind}) vs "
            f"{result.baseline.metrics['settling_time']:.3f}s (none), peak |phi| "
            f"{result.metrics['peak_abs_phi']:.4f} vs {result.baseline.metrics['peak_abs_phi']:.4f} rad"
        )
    else:
        logger.info(f"{plan.name}: settling {result.metrics['settling_time']:.3f}s, "
                    f"RMS error {result.metrics['rms_error']:.5f} rad")

    if write:
        write_result(result, config.output_dir)
        if result.baseline is not None:
            write_result(result.baseline, config.output_dir)
        if monitor is not None and monitor.records:
            write_metrics(monitor.flat_summary(), config.output_dir / f"{result.name}_monitor.txt")
    return result


def _run_job(config: RunConfig) -> ExperimentResult:
    return run_scenario(config)


def run_batch(config: RunConfig,
              scenarios: Sequence[str],
              workers: int = 1) -> Dict[str, ExperimentResult]:
    """Run several scenarios, each with its own plant and controller state.

    Results do not depend on `workers`.
    """
    jobs = [config.with_overrides(scenario=name) for name in scenarios]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]
    return dict(zip(scenarios, results))


def collect_training_data(config: RunConfig, write: bool = True) -> List[Trajectory]:
    """Open-loop excitation runs from rest.

    Trajectories whose output barely moves are rejected with a warning.

    Raises:
        NumericalBlowupError: integration failed (names the excitation)
        DegenerateDataError: every trajectory was rejected
        EmptyDatasetError: fewer snapshot pairs than collect.target_pairs
    """
    params = config.plant
    cfg = config.collect
    rng = np.random.default_rng(config.run.seed)
    noise_rng = np.random.default_rng([config.run.seed, 1])
    s = config.lifting.delays

    if write and config.training_dir.exists():
        for stale in config.training_dir.glob("[0-9][0-9]_*.csv"):
            stale.unlink()

    accepted: List[Trajectory] = []
    for i in range(cfg.trajectories):
        shape = EXCITATIONS[i % len(EXCITATIONS)]
        name = f"{i:02d}_{shape}"
        u = excitation(shape, cfg, params.dt, params.torque_limit, rng)
        d = np.zeros_like(u)
        try:
            records = simulate(TowerState.at_rest(params), u, d, params)
        except NumericalBlowupError as e:
            raise NumericalBlowupError(f"Excitation '{shape}': {e}", time=e.time, sample=e.sample) from e
        trajectory = Trajectory.from_rollout(records, u, d, name=name)

        if config.noise.amplitude > 0:
            a = config.noise.amplitude
            trajectory.phi = trajectory.phi + noise_rng.uniform(-a, a, size=len(trajectory))
            trajectory.phi_dot = trajectory.phi_dot + noise_rng.uniform(-a, a, size=len(trajectory))

        spread = float(np.min(trajectory.outputs.std(axis=1)))
        if spread < cfg.min_output_std:
            logger.warning(f"Excitation '{shape}': output variance below threshold "
                           f"(std {spread:.2e} < {cfg.min_output_std:.2e}), trajectory rejected")
            continue
        accepted.append(trajectory)
        if write:
            write_trajectory(trajectory, config.training_dir)

    if not accepted:
        raise DegenerateDataError("All excitation runs were rejected; dataset is empty")
    pairs = sum(max(0, len(traj) - s - 1) for traj in accepted)
    logger.info(f"Collected {len(accepted)} trajectories with {pairs} snapshot pairs (delays={s})")
    if pairs < cfg.target_pairs:
        raise EmptyDatasetError(
            f"Only {pairs} snapshot pairs collected, target is {cfg.target_pairs}; "
            f"increase collect.duration"
        )
    return accepted
