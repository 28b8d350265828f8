"""
Pipeline orchestration: collect, identify, design, run, evaluate.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.control.closed_loop import ExperimentResult
from src.control.lqr import LqrDesign, design_lqr
from src.errors import InvalidInputError
from src.experiments.config import RunConfig
from src.experiments.scenarios import collect_training_data, run_batch, run_scenario
from src.experiments.storage import FLOAT_FORMAT, read_trajectories, write_metrics
from src.identification.edmd import (
    LiftedPredictor,
    assemble,
    evaluate,
    evaluate_baseline,
    fit,
    split_heldout,
)
from src.identification.predictor_io import load_predictor, save_predictor
from src.monitoring.loop_monitor import LoopMonitor
from src.plant.trajectory import Trajectory

logger = logging.getLogger(__name__)


@dataclass
class Evaluation:
    """k-step NRMSE of the predictor and of the zero-order-hold baseline."""
    horizon: int
    predictor: np.ndarray
    baseline: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "step": np.arange(1, self.horizon + 1),
            "nrmse_predictor": self.predictor,
            "nrmse_baseline": self.baseline,
        })


class TowerPipeline:
    """Runs the identification and control workflow against one output directory."""

    def __init__(self, config: RunConfig, monitor: Optional[LoopMonitor] = None):
        """
        Args:
            config: Run configuration
            monitor: Shared monitor; a fresh one is created when omitted
        """
        self.config = config
        self.monitor = monitor or LoopMonitor()
        self.output_dir = config.output_dir
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def collect(self) -> List[Trajectory]:
        with self.monitor.track_operation("collect"):
            return collect_training_data(self.config)

    def _training_split(self):
        trajectories = read_trajectories(self.config.training_dir)
        if len(trajectories) < 2:
            return trajectories, None
        return split_heldout(trajectories)

    def identify(self) -> LiftedPredictor:
        """Fit the predictor on all but the last trajectory and save it.

        Any previously designed gain is dropped since it no longer matches.
        """
        with self.monitor.track_operation("identify"):
            training, heldout = self._training_split()
            data = assemble(training, self.config.lifting, dt=self.config.plant.dt)
            predictor = fit(data, ridge=self.config.edmd.ridge, rtol=self.config.edmd.rtol)
            save_predictor(predictor, self.config.predictor_path)

        if heldout is not None:
            self.evaluate(predictor, heldout)
        return predictor

    def load(self):
        pred, extras = load_predictor(self.config.predictor_path)
        return pred, extras

    def design_lqr(self, predictor: Optional[LiftedPredictor] = None) -> LqrDesign:
        """Design the LQR gain and store K and P next to the predictor."""
        if predictor is None:
            predictor, _ = self.load()
        settings = self.config.lqr
        with self.monitor.track_operation("design_lqr"):
            design = design_lqr(predictor, q_phi=settings.q_phi, q_phidot=settings.q_phidot,
                                r=settings.r)
        save_predictor(predictor, self.config.predictor_path, K=design.K, P=design.P)
        write_metrics({"closed_loop_spectral_radius": design.spectral_radius,
                       "dare_iterations": design.iterations,
                       "q_phi": settings.q_phi, "q_phidot": settings.q_phidot, "r": settings.r},
                      self.output_dir / "lqr_metrics.txt")
        return design

    def evaluate(self,
                 predictor: Optional[LiftedPredictor] = None,
                 heldout: Optional[Trajectory] = None,
                 horizon: Optional[int] = None) -> Evaluation:
        """Multi-step NRMSE on the held-out trajectory, written to predictor_nrmse.csv."""
        if predictor is None:
            predictor, _ = self.load()
        if heldout is None:
            _, heldout = self._training_split()
            if heldout is None:
                raise InvalidInputError("Need at least two training trajectories to evaluate")
        horizon = horizon or self.config.edmd.eval_horizon

        with self.monitor.track_operation("evaluate"):
            evaluation = Evaluation(
                horizon=horizon,
                predictor=evaluate(predictor, heldout, horizon),
                baseline=evaluate_baseline(heldout, predictor.spec, horizon),
            )
        evaluation.to_frame().to_csv(self.output_dir / "predictor_nrmse.csv", index=False,
                                     float_format=FLOAT_FORMAT)
        logger.info(
            f"Held-out NRMSE at step {horizon}: predictor {evaluation.predictor[-1]:.4f}, "
            f"zero-order hold {evaluation.baseline[-1]:.4f}"
        )
        return evaluation

    def run(self, scenarios: Optional[Sequence[str]] = None) -> Dict[str, ExperimentResult]:
        """Run one or more scenarios with the configured controller."""
        scenarios = list(scenarios) if scenarios else [self.config.scenario.name]
        if len(scenarios) == 1:
            config = self.config.with_overrides(scenario=scenarios[0])
            return {scenarios[0]: run_scenario(config, monitor=self.monitor)}
        return run_batch(self.config, scenarios, workers=self.config.run.workers)

    def write_monitor_summary(self) -> Optional[Path]:
        summary = self.monitor.flat_summary()
        if not summary:
            return None
        self.monitor.write_textfile(self.output_dir / "monitor.prom")
        return write_metrics(summary, self.output_dir / "monitor.txt")
