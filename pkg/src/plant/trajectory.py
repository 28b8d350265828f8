"""Sampled input/output trajectories of the tower."""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import InvalidInputError
from src.plant.tower import Measurement, TowerState

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["t", "phi", "phi_dot", "u", "d"]


@dataclass
class Trajectory:
    """One uniformly sampled record of measurements and applied inputs.

    u[k] is the torque applied over [t[k], t[k+1]); u_before is the torque
    applied just before the first sample (zero when starting from rest).
    """
    t: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray
    u: np.ndarray
    d: np.ndarray
    name: str = "trajectory"
    u_before: float = 0.0

    def __post_init__(self):
        for attr in TRAJECTORY_COLUMNS:
            setattr(self, attr, np.asarray(getattr(self, attr), dtype=float).ravel())
        lengths = {len(getattr(self, attr)) for attr in TRAJECTORY_COLUMNS}
        if len(lengths) != 1:
            raise InvalidInputError(f"Trajectory '{self.name}' has ragged columns")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def outputs(self) -> np.ndarray:
        """Outputs as a (2, L) array of (phi, phi_dot) columns."""
        return np.vstack([self.phi, self.phi_dot])

    @property
    def measurements(self) -> List[Tuple[Measurement, float]]:
        return [(Measurement(float(p), float(pd_)), float(u))
                for p, pd_, u in zip(self.phi, self.phi_dot, self.u)]

    @classmethod
    def from_rollout(cls,
                     records: Sequence[Tuple[TowerState, Measurement]],
                     u_signal: Sequence[float],
                     d_signal: Sequence[float],
                     name: str = "trajectory") -> "Trajectory":
        """Build a trajectory from the output of `simulate`."""
        return cls(
            t=np.array([state.t for state, _ in records]),
            phi=np.array([m.phi for _, m in records]),
            phi_dot=np.array([m.phi_dot for _, m in records]),
            u=np.asarray(u_signal, dtype=float)[:len(records)],
            d=np.asarray(d_signal, dtype=float)[:len(records)],
            name=name,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({col: getattr(self, col) for col in TRAJECTORY_COLUMNS})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, name: str = "trajectory") -> "Trajectory":
        missing = [col for col in TRAJECTORY_COLUMNS if col not in frame.columns]
        if missing:
            raise InvalidInputError(f"Trajectory '{name}' is missing columns {missing}")
        return cls(**{col: frame[col].to_numpy() for col in TRAJECTORY_COLUMNS}, name=name)
