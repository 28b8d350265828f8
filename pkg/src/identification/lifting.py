"""
Delay-embedding observables.

The base observable at sample k is psi_k = (phi_k, phi_dot_k, u_{k-1}) and the
lifted state stacks the last `delays + 1` of them, oldest block first:
z_k = [psi_{k-s}, ..., psi_{k-1}, psi_k].
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.errors import InvalidInputError, NotReadyError
from src.plant.tower import Measurement
from src.plant.trajectory import Trajectory

logger = logging.getLogger(__name__)

BASE_DIM = 3


@dataclass(frozen=True)
class LiftingSpec:
    """Number of delay embeddings and size of the base observable."""
    delays: int = 2
    base_dim: int = BASE_DIM

    def __post_init__(self):
        if self.delays < 0:
            raise InvalidInputError(f"delays must be >= 0, got {self.delays}")
        if self.base_dim != BASE_DIM:
            raise InvalidInputError(f"base_dim must be {BASE_DIM}, got {self.base_dim}")

    @property
    def lifted_dim(self) -> int:
        return self.base_dim * (self.delays + 1)

    @property
    def window(self) -> int:
        """Number of samples needed before lift is defined."""
        return self.delays + 1

    @property
    def output_indices(self) -> Tuple[int, int]:
        """Positions of (phi, phi_dot) of the newest block inside z."""
        start = self.lifted_dim - self.base_dim
        return start, start + 1

    @property
    def input_index(self) -> int:
        """Position of the newest delayed input inside z."""
        return self.lifted_dim - 1


@dataclass(frozen=True)
class HistoryBuffer:
    """Last `capacity` records of (phi, phi_dot, u_prev), oldest first."""
    capacity: int
    entries: Tuple[Tuple[float, float, float], ...] = field(default=())

    @classmethod
    def empty(cls, spec: LiftingSpec) -> "HistoryBuffer":
        return cls(capacity=spec.window)

    @property
    def filled(self) -> int:
        return len(self.entries)

    @property
    def ready(self) -> bool:
        return self.filled == self.capacity

    def push(self, m: Measurement, u_prev: float) -> "HistoryBuffer":
        return push(self, m, u_prev)


def push(buffer: HistoryBuffer, m: Measurement, u_prev: float) -> HistoryBuffer:
    """Append one record, evicting the oldest when full."""
    entries = buffer.entries + ((float(m.phi), float(m.phi_dot), float(u_prev)),)
    return HistoryBuffer(capacity=buffer.capacity, entries=entries[-buffer.capacity:])


def lift(buffer: HistoryBuffer, spec: LiftingSpec) -> np.ndarray:
    """Lifted vector z in R^N, oldest block first.

    Raises:
        NotReadyError: buffer holds fewer than delays + 1 records
    """
    if buffer.capacity != spec.window:
        raise InvalidInputError(
            f"Buffer capacity {buffer.capacity} does not match {spec.window} for delays={spec.delays}"
        )
    if not buffer.ready:
        raise NotReadyError(f"History has {buffer.filled}/{spec.window} records; warm up first")
    return np.array(buffer.entries, dtype=float).ravel()


@dataclass(frozen=True)
class LiftedTrajectory:
    """Snapshot pairs from a single trajectory, one column per pair."""
    Z: np.ndarray
    Z_plus: np.ndarray
    U: np.ndarray
    Y: np.ndarray
    Y_plus: np.ndarray

    @property
    def pairs(self) -> int:
        return self.Z.shape[1]


TrajectoryLike = Union[Trajectory, Sequence[Tuple[Measurement, float]]]


def as_trajectory(trajectory: TrajectoryLike) -> Trajectory:
    if isinstance(trajectory, Trajectory):
        return trajectory
    records = list(trajectory)
    n = len(records)
    return Trajectory(
        t=np.arange(n, dtype=float),
        phi=[m.phi for m, _ in records],
        phi_dot=[m.phi_dot for m, _ in records],
        u=[u for _, u in records],
        d=np.zeros(n),
    )


def lifted_states(trajectory: Trajectory, spec: LiftingSpec) -> np.ndarray:
    """All lifted states of a trajectory as an (N, L - delays) array.

    Column j is z_{j + delays}.
    """
    u_prev = np.concatenate([[trajectory.u_before], trajectory.u[:-1]])
    psi = np.column_stack([trajectory.phi, trajectory.phi_dot, u_prev])
    if len(psi) < spec.window:
        return np.zeros((spec.lifted_dim, 0))
    windows = sliding_window_view(psi, (spec.window, spec.base_dim))[:, 0]
    return windows.reshape(len(windows), spec.lifted_dim).T


def lift_trajectory(trajectory: TrajectoryLike, spec: LiftingSpec) -> LiftedTrajectory:
    """Snapshot matrices of one trajectory; pairs never leave the trajectory."""
    trajectory = as_trajectory(trajectory)
    L = len(trajectory)
    if L < spec.delays + 2:
        logger.warning(
            f"Trajectory '{trajectory.name}' has {L} samples, needs {spec.delays + 2}; no pairs emitted"
        )
        empty = np.zeros((spec.lifted_dim, 0))
        return LiftedTrajectory(empty, empty.copy(), np.zeros((1, 0)),
                                np.zeros((2, 0)), np.zeros((2, 0)))

    Z_all = lifted_states(trajectory, spec)
    s = spec.delays
    outputs = trajectory.outputs
    return LiftedTrajectory(
        Z=Z_all[:, :-1],
        Z_plus=Z_all[:, 1:],
        U=trajectory.u[s:L - 1].reshape(1, -1),
        Y=outputs[:, s:L - 1],
        Y_plus=outputs[:, s + 1:L],
    )


def lift_dataset(trajectory: TrajectoryLike,
                 spec: LiftingSpec) -> List[Tuple[np.ndarray, np.ndarray, float]]:
    """Snapshot triples (z_k, z_{k+1}, u_k) of one trajectory."""
    lifted = lift_trajectory(trajectory, spec)
    return [(lifted.Z[:, i], lifted.Z_plus[:, i], float(lifted.U[0, i]))
            for i in range(lifted.pairs)]
