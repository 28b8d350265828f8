"""
Surrogate simulator for the voxel tower.

The tower is modelled as a planar chain of rigid links stacked on an actuated
base joint. Every joint carries a linear torsional spring and damper, every
link carries a point mass at its tip, and gravity acts as an inverted
pendulum term on each link. The measured output is the absolute tilt and tilt
rate of one link halfway up the chain.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from src.errors import InvalidInputError, NumericalBlowupError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlantParams:
    """Physical and sampling parameters of the link chain."""
    n_links: int = 8
    link_mass: float = 0.1
    link_length: float = 0.07
    stiffness: float = 7.1
    damping: float = 0.028
    gravity: float = 9.81
    sensor_link: int = 4
    torque_limit: float = 0.5
    dt: float = 0.01
    substeps: int = 4

    def __post_init__(self):
        values = (self.link_mass, self.link_length, self.stiffness,
                  self.damping, self.gravity, self.torque_limit, self.dt)
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError("Plant parameters must be finite")
        if self.n_links < 2:
            raise InvalidInputError(f"n_links must be >= 2, got {self.n_links}")
        if not 1 <= self.sensor_link <= self.n_links:
            raise InvalidInputError(
                f"sensor_link must lie in [1, {self.n_links}], got {self.sensor_link}"
            )
        for name in ("link_mass", "link_length", "stiffness", "damping",
                     "dt", "torque_limit"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive")
        if self.gravity < 0:
            raise InvalidInputError("gravity must be non-negative")
        if self.substeps < 1:
            raise InvalidInputError("substeps must be >= 1")

    @property
    def inertia(self) -> float:
        """Point-mass inertia of one link about its own joint."""
        return self.link_mass * self.link_length ** 2

    @property
    def gravity_moment(self) -> float:
        return self.link_mass * self.gravity * self.link_length


@dataclass(frozen=True)
class TowerState:
    """Absolute link angles (rad), angular velocities (rad/s) and time (s)."""
    theta: np.ndarray
    omega: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        omega = np.array(self.omega, dtype=float)
        if theta.ndim != 1 or theta.shape != omega.shape:
            raise InvalidInputError(
                f"theta and omega must be vectors of equal length, "
                f"got {theta.shape} and {omega.shape}"
            )
        theta.setflags(write=False)
        omega.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def at_rest(cls, params: PlantParams, t: float = 0.0) -> "TowerState":
        return cls(np.zeros(params.n_links), np.zeros(params.n_links), t)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.theta)) and
                    np.all(np.isfinite(self.omega)) and math.isfinite(self.t))


@dataclass(frozen=True)
class Measurement:
    """Tilt and tilt rate of the sensor link."""
    phi: float
    phi_dot: float


@dataclass(frozen=True)
class LinearizedTower:
    """Continuous-time Jacobians at the upright equilibrium.

    The state ordering is [theta; omega].
    """
    A: np.ndarray
    B_u: np.ndarray
    B_d: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)


def _check_state(state: TowerState, params: PlantParams):
    if state.theta.shape != (params.n_links,):
        raise InvalidInputError(
            f"State has {state.theta.shape[0]} links, params expect {params.n_links}"
        )
    if not state.is_finite():
        raise InvalidInputError(f"Non-finite state at t={state.t}")


def _acceleration(theta: np.ndarray,
                  omega: np.ndarray,
                  u: float,
                  d: float,
                  params: PlantParams) -> np.ndarray:
    # relative joint angle/rate; the base joint is measured against the ground
    rel_angle = np.diff(theta, prepend=0.0)
    rel_rate = np.diff(omega, prepend=0.0)

    joint_torque = -params.stiffness * rel_angle - params.damping * rel_rate
    joint_torque[0] += u

    # joint i drives link i and reacts on link i-1
    net = joint_torque.copy()
    net[:-1] -= joint_torque[1:]
    net += params.gravity_moment * np.sin(theta)
    net[-1] += d
    return net / params.inertia


def dynamics(state: TowerState,
             u: float,
             d: float,
             params: PlantParams) -> Tuple[np.ndarray, np.ndarray]:
    """Time derivative of the tower state.

    Saturation of u is not applied here.

    Args:
        state: Current state
        u: Base joint torque (N·m)
        d: Disturbance torque at the top link (N·m)
        params: Plant parameters

    Returns:
        Tuple (theta_dot, omega_dot)
    """
    _check_state(state, params)
    if not (math.isfinite(u) and math.isfinite(d)):
        raise InvalidInputError(f"Non-finite input u={u}, d={d}")
    return state.omega.copy(), _acceleration(state.theta, state.omega, u, d, params)


def step(state: TowerState, u: float, d: float, params: PlantParams) -> TowerState:
    """Advance one sample period with fixed-step RK4.

    The sample period is split into `params.substeps` RK4 steps; u and d are
    held constant over the sample.
    """
    _check_state(state, params)
    h = params.dt / params.substeps
    theta = state.theta.copy()
    omega = state.omega.copy()

    for _ in range(params.substeps):
        k1_t, k1_w = omega, _acceleration(theta, omega, u, d, params)
        t2, w2 = theta + 0.5 * h * k1_t, omega + 0.5 * h * k1_w
        k2_t, k2_w = w2, _acceleration(t2, w2, u, d, params)
        t3, w3 = theta + 0.5 * h * k2_t, omega + 0.5 * h * k2_w
        k3_t, k3_w = w3, _acceleration(t3, w3, u, d, params)
        t4, w4 = theta + h * k3_t, omega + h * k3_w
        k4_t, k4_w = w4, _acceleration(t4, w4, u, d, params)

        theta = theta + (h / 6.0) * (k1_t + 2.0 * k2_t + 2.0 * k3_t + k4_t)
        omega = omega + (h / 6.0) * (k1_w + 2.0 * k2_w + 2.0 * k3_w + k4_w)

    t_next = state.t + params.dt
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(omega))):
        raise NumericalBlowupError(f"Integration blew up at t={t_next:.4f}s", time=t_next)
    return TowerState(theta, omega, t_next)


def measure(state: TowerState, params: PlantParams) -> Measurement:
    """Read the sensor link (1-based index)."""
    idx = params.sensor_link - 1
    return Measurement(phi=float(state.theta[idx]), phi_dot=float(state.omega[idx]))


def simulate(initial: TowerState,
             u_signal: Sequence[float],
             d_signal: Sequence[float],
             params: PlantParams) -> List[Tuple[TowerState, Measurement]]:
    """Open-loop rollout.

    Record k holds the state before input u_signal[k] is applied, so the first
    record is the initial condition and the output has len(u_signal) records.
    """
    u_signal = np.asarray(u_signal, dtype=float)
    d_signal = np.asarray(d_signal, dtype=float)
    if u_signal.shape != d_signal.shape:
        raise InvalidInputError(
            f"u_signal and d_signal lengths differ: {u_signal.shape} vs {d_signal.shape}"
        )

    records = []
    state = initial
    for k, (u, d) in enumerate(zip(u_signal, d_signal)):
        records.append((state, measure(state, params)))
        if k == len(u_signal) - 1:
            break
        try:
            state = step(state, float(u), float(d), params)
        except NumericalBlowupError as e:
            raise NumericalBlowupError(f"{e} (sample {k})", time=e.time, sample=k) from e
    return records


def energy(state: TowerState, params: PlantParams) -> float:
    """Total mechanical energy, zero at the upright rest state."""
    rel_angle = np.diff(state.theta, prepend=0.0)
    kinetic = 0.5 * params.inertia * float(np.sum(state.omega ** 2))
    spring = 0.5 * params.stiffness * float(np.sum(rel_angle ** 2))
    gravity = params.gravity_moment * float(np.sum(np.cos(state.theta) - 1.0))
    return kinetic + spring + gravity


def tilted_state(params: PlantParams, tilt: float, t: float = 0.0) -> TowerState:
    """Whole tower rotated rigidly about the base joint by `tilt` rad."""
    return TowerState(np.full(params.n_links, float(tilt)), np.zeros(params.n_links), t)


def linearize(params: PlantParams, eps: float = 1e-6) -> LinearizedTower:
    """Central finite-difference Jacobian of the dynamics at the origin."""
    n = params.n_links

    def f(x: np.ndarray, u: float, d: float) -> np.ndarray:
        theta, omega = x[:n], x[n:]
        return np.concatenate([omega, _acceleration(theta, omega, u, d, params)])

    x0 = np.zeros(2 * n)
    A = np.zeros((2 * n, 2 * n))
    for j in range(2 * n):
        dx = np.zeros(2 * n)
        dx[j] = eps
        A[:, j] = (f(x0 + dx, 0.0, 0.0) - f(x0 - dx, 0.0, 0.0)) / (2 * eps)
    B_u = ((f(x0, eps, 0.0) - f(x0, -eps, 0.0)) / (2 * eps)).reshape(-1, 1)
    B_d = ((f(x0, 0.0, eps) - f(x0, 0.0, -eps)) / (2 * eps)).reshape(-1, 1)

    return LinearizedTower(A=A, B_u=B_u, B_d=B_d, eigenvalues=np.linalg.eigvals(A))


def modal_frequencies(params: PlantParams) -> Tuple[np.ndarray, np.ndarray]:
    """Damped modal frequencies (rad/s) and decay rates (1/s), slowest first."""
    eig = linearize(params).eigenvalues
    oscillatory = eig[eig.imag > 1e-9]
    order = np.argsort(oscillatory.imag)
    oscillatory = oscillatory[order]
    return oscillatory.imag.copy(), -oscillatory.real.copy()
