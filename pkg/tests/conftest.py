"""
Shared fixtures: a short identification run on the simulated tower and a
small exactly-linear plant.
"""

import numpy as np
import pytest

from src.control.lqr import design_lqr
from src.experiments.config import CollectSettings, RunConfig, RunSettings
from src.experiments.scenarios import collect_training_data
from src.identification.edmd import assemble, fit, split_heldout
from src.plant.trajectory import Trajectory


@pytest.fixture(scope="session")
def run_config(tmp_path_factory):
    """Default configuration with a shorter collection and a temporary output directory."""
    out = tmp_path_factory.mktemp("run")
    return RunConfig(collect=CollectSettings(duration=10.0, target_pairs=1000),
                     run=RunSettings(output_dir=str(out)))


@pytest.fixture(scope="session")
def training_trajectories(run_config):
    """Open-loop excitation runs on the default tower."""
    return collect_training_data(run_config, write=False)


@pytest.fixture(scope="session")
def tower_predictor(run_config, training_trajectories):
    """Predictor fitted on all but the last training trajectory."""
    training, _ = split_heldout(training_trajectories)
    data = assemble(training, run_config.lifting, dt=run_config.plant.dt)
    return fit(data, ridge=None)


@pytest.fixture(scope="session")
def tower_lqr(run_config, tower_predictor):
    """LQR design with the configured weights."""
    settings = run_config.lqr
    return design_lqr(tower_predictor, q_phi=settings.q_phi, q_phidot=settings.q_phidot, r=settings.r)


def linear_trajectory(A, B, u, x0=None, name="linear"):
    """Trajectory of x_{k+1} = A x_k + B u_k with y = x = (phi, phi_dot)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).ravel()
    u = np.asarray(u, dtype=float)
    x = np.zeros(2) if x0 is None else np.asarray(x0, dtype=float)
    states = []
    for uk in u:
        states.append(x)
        x = A @ x + B * uk
    states = np.array(states)
    return Trajectory(t=0.01 * np.arange(len(u)), phi=states[:, 0], phi_dot=states[:, 1],
                      u=u, d=np.zeros(len(u)), name=name)


@pytest.fixture
def linear_plant():
    """A stable 2-state linear system."""
    A = np.array([[0.9, 0.1], [-0.2, 0.8]])
    B = np.array([0.05, 0.3])
    return A, B
