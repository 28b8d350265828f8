"""
Dense delta-input MPC on the lifted predictor.

Decision variable is dU = [du_0; ...; du_{Np-1}] with u_k = u_prev + sum_{j<=k} du_j.
Over the horizon the predictor is rolled out as
z_{k+1} = A z_k + B u_k + w, where w is a lifted disturbance estimate held constant,
and the cost

    1/2 sum_{k=1}^{Np-1} e_k' Qe e_k + 1/2 e_Np' S e_Np
      + 1/2 sum_{k=0}^{Np-1} (u_k' R u_k + du_k' R_delta du_k),   e_k = r_k - C z_k

is condensed into 1/2 dU' H dU + (F [z0; r] + F_u u_prev + F_w w)' dU + const.
The e_0 term does not depend on dU and is left out. The reference vector r
stacks r_1, ..., r_Np.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg

from src.control.closed_loop import ControlAction, ExperimentResult, run_closed_loop
from src.errors import (
    CondensationError,
    DimensionMismatchError,
    InfeasibleProblemError,
    InvalidInputError,
)
from src.identification.edmd import LiftedPredictor
from src.identification.lifting import HistoryBuffer, lift
from src.optimization.admm_qp import AdmmSolver, QpProblem, QpSettings, QpStatus
from src.plant.session import PlantSession, Signal, zero_signal

logger = logging.getLogger(__name__)

Bound = Union[float, np.ndarray]


def _as_square(value, size: Optional[int] = None) -> np.ndarray:
    M = np.atleast_2d(np.asarray(value, dtype=float))
    if M.shape == (1, 1) and size is not None and size > 1:
        M = M[0, 0] * np.eye(size)
    return M


def _is_psd(M: np.ndarray) -> bool:
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
        return False
    return bool(np.min(linalg.eigvalsh(M)) >= -1e-12 * max(1.0, np.max(np.abs(M))))


@dataclass
class KmpcConfig:
    """Horizon, penalties and bounds of the tracking MPC.

    Scalars given for Qe, S, R or R_delta are expanded to multiples of the
    identity when the problem is condensed. S defaults to 10 * Qe.
    """
    Np: int = 10
    Qe: np.ndarray = field(default_factory=lambda: np.diag([10.0, 1.0]))
    S: Optional[np.ndarray] = None
    R: np.ndarray = field(default_factory=lambda: np.array([[0.01]]))
    R_delta: np.ndarray = field(default_factory=lambda: np.array([[100.0]]))
    u_min: Bound = -0.5
    u_max: Bound = 0.5
    du_min: Optional[Bound] = None
    du_max: Optional[Bound] = None
    disturbance_gain: float = 0.1

    def __post_init__(self):
        if int(self.Np) != self.Np or self.Np < 1:
            raise InvalidInputError(f"Np must be a positive integer, got {self.Np}")
        self.Np = int(self.Np)
        self.Qe = _as_square(self.Qe)
        self.S = 10.0 * self.Qe if self.S is None else _as_square(self.S)
        self.R = _as_square(self.R)
        self.R_delta = _as_square(self.R_delta)
        for name in ("Qe", "S", "R", "R_delta"):
            if not _is_psd(getattr(self, name)):
                raise InvalidInputError(f"{name} must be symmetric positive semidefinite")
        if np.any(np.asarray(self.u_min, dtype=float) >= np.asarray(self.u_max, dtype=float)):
            raise InvalidInputError("u_min must be strictly below u_max")
        if (self.du_min is not None and self.du_max is not None
                and np.any(np.asarray(self.du_min, dtype=float) >= np.asarray(self.du_max, dtype=float))):
            raise InvalidInputError("du_min must be strictly below du_max")
        if not 0.0 <= self.disturbance_gain <= 1.0:
            raise InvalidInputError("disturbance_gain must lie in [0, 1]")


@dataclass(frozen=True)
class CondensedLayout:
    """Block ordering: dU by time step, parameters as [z0; r_1; ...; r_Np]."""
    Np: int
    m: int
    N: int
    q: int
    rate_rows: bool = False

    @property
    def n_var(self) -> int:
        return self.m * self.Np

    @property
    def n_param(self) -> int:
        return self.N + self.q * self.Np

    @property
    def n_con(self) -> int:
        return self.n_var * (2 if self.rate_rows else 1)

    def step(self, k: int) -> slice:
        """Rows of dU belonging to time step k."""
        return slice(k * self.m, (k + 1) * self.m)


@dataclass(frozen=True)
class CondensedQP:
    """Dense QP data plus the prediction maps used to rebuild its terms.

    Constraint bounds depend on u_prev: b(u_prev) = b - b_shift u_prev.
    """
    H: np.ndarray
    F: np.ndarray
    F_u: np.ndarray
    F_w: np.ndarray
    G: np.ndarray
    b_min: np.ndarray
    b_max: np.ndarray
    b_shift: np.ndarray
    layout: CondensedLayout
    Phi: np.ndarray = field(repr=False)
    M: np.ndarray = field(repr=False)
    Gamma_u: np.ndarray = field(repr=False)
    Lambda: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    T: np.ndarray = field(repr=False)
    R_bar: np.ndarray = field(repr=False)

    def _params(self, z0, r, u_prev, w):
        lay = self.layout
        z0 = np.asarray(z0, dtype=float).ravel()
        r = np.asarray(r, dtype=float).ravel()
        u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float)).ravel()
        w = np.zeros(lay.N) if w is None else np.asarray(w, dtype=float).ravel()
        if z0.shape != (lay.N,) or w.shape != (lay.N,):
            raise DimensionMismatchError(f"z0 and w must have length {lay.N}")
        if r.shape != (lay.q * lay.Np,):
            raise DimensionMismatchError(f"r must stack {lay.Np} references of size {lay.q}")
        if u_prev.shape != (lay.m,):
            raise DimensionMismatchError(f"u_prev must have length {lay.m}")
        return z0, r, u_prev, w

    def linear_term(self, z0, r, u_prev, w=None) -> np.ndarray:
        z0, r, u_prev, w = self._params(z0, r, u_prev, w)
        return self.F @ np.concatenate([z0, r]) + self.F_u @ u_prev + self.F_w @ w

    def bounds(self, u_prev) -> Tuple[np.ndarray, np.ndarray]:
        u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float)).ravel()
        shift = self.b_shift @ u_prev
        return self.b_min - shift, self.b_max - shift

    def problem(self, z0, r, u_prev, w=None) -> QpProblem:
        b_min, b_max = self.bounds(u_prev)
        return QpProblem(H=self.H, f=self.linear_term(z0, r, u_prev, w), G=self.G,
                         b_min=b_min, b_max=b_max)

    def inputs(self, dU, u_prev) -> np.ndarray:
        """Planned absolute inputs as an (Np, m) array."""
        u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float)).ravel()
        return (self.T @ np.asarray(dU, dtype=float) + self.b_shift[:self.layout.n_var] @ u_prev).reshape(
            self.layout.Np, self.layout.m)

    def outputs(self, dU, z0, u_prev, w=None) -> np.ndarray:
        """Predicted outputs C z_1 ... C z_Np as an (Np, q) array."""
        lay = self.layout
        z0, _, u_prev, w = self._params(z0, np.zeros(lay.q * lay.Np), u_prev, w)
        Y = self.Phi @ z0 + self.M @ np.asarray(dU, dtype=float) + self.Gamma_u @ u_prev + self.Lambda @ w
        return Y.reshape(lay.Np, lay.q)

    def objective(self, dU, z0, r, u_prev, w=None) -> float:
        """Full horizon cost of dU, including the dU-independent part (except e_0)."""
        z0, r, u_prev, w = self._params(z0, r, u_prev, w)
        dU = np.asarray(dU, dtype=float).ravel()
        offset = self.Phi @ z0 + self.Gamma_u @ u_prev + self.Lambda @ w - r
        held = self.b_shift[:self.layout.n_var] @ u_prev
        constant = 0.5 * offset @ self.W @ offset + 0.5 * held @ self.R_bar @ held
        return float(0.5 * dU @ self.H @ dU + self.linear_term(z0, r, u_prev, w) @ dU + constant)


def _horizon_bound(value: Optional[Bound], m: int, Np: int, default: float) -> np.ndarray:
    if value is None:
        return np.full(m * Np, default)
    v = np.asarray(value, dtype=float).ravel()
    if v.size == 1:
        v = np.full(m, v[0])
    if v.size == m:
        return np.tile(v, Np)
    if v.size == m * Np:
        return v
    raise DimensionMismatchError(f"Bound has {v.size} entries, expected 1, {m} or {m * Np}")


def condense(pred: LiftedPredictor, cfg: KmpcConfig) -> CondensedQP:
    """Eliminate the lifted states and build the dense delta-input QP.

    Raises:
        DimensionMismatchError: penalty sizes do not match the predictor
        CondensationError: the condensed Hessian is not positive definite
    """
    A, B, C = pred.A, pred.B, pred.C
    N, m, q, Np = pred.N, pred.m, pred.q, cfg.Np
    Qe, S = _as_square(cfg.Qe, q), _as_square(cfg.S, q)
    R, R_delta = _as_square(cfg.R, m), _as_square(cfg.R_delta, m)
    if Qe.shape != (q, q) or S.shape != (q, q):
        raise DimensionMismatchError(f"Qe and S must be {q}x{q} for this predictor")
    if R.shape != (m, m) or R_delta.shape != (m, m):
        raise DimensionMismatchError(f"R and R_delta must be {m}x{m} for this predictor")

    # C A^i for i = 0..Np
    CA = [C]
    for _ in range(Np):
        CA.append(CA[-1] @ A)
    CA_B = [CAi @ B for CAi in CA]

    Phi = np.zeros((q * Np, N))
    Gamma = np.zeros((q * Np, m * Np))
    Lam = np.zeros((q * Np, N))
    acc = np.zeros((q, N))
    for k in range(1, Np + 1):
        rows = slice((k - 1) * q, k * q)
        Phi[rows] = CA[k]
        acc = acc + CA[k - 1]
        Lam[rows] = acc
        for j in range(k):
            Gamma[rows, j * m:(j + 1) * m] = CA_B[k - 1 - j]

    T = np.kron(np.tril(np.ones((Np, Np))), np.eye(m))
    ones_u = np.kron(np.ones((Np, 1)), np.eye(m))
    W = linalg.block_diag(*([Qe] * (Np - 1) + [S]))
    R_bar = linalg.block_diag(*([R] * Np))
    R_delta_bar = linalg.block_diag(*([R_delta] * Np))

    M = Gamma @ T
    MtW = M.T @ W
    H = MtW @ M + T.T @ R_bar @ T + R_delta_bar
    H = 0.5 * (H + H.T)
    try:
        linalg.cholesky(H)
    except linalg.LinAlgError as e:
        raise CondensationError(
            "Condensed Hessian is not positive definite; use R > 0 or R_delta > 0"
        ) from e

    F = np.hstack([MtW @ Phi, -MtW])
    Gamma_u = Gamma @ ones_u
    F_u = MtW @ Gamma_u + T.T @ R_bar @ ones_u
    F_w = MtW @ Lam

    G = T
    b_min = _horizon_bound(cfg.u_min, m, Np, -np.inf)
    b_max = _horizon_bound(cfg.u_max, m, Np, np.inf)
    b_shift = ones_u
    rate_rows = cfg.du_min is not None or cfg.du_max is not None
    if rate_rows:
        G = np.vstack([G, np.eye(m * Np)])
        b_min = np.concatenate([b_min, _horizon_bound(cfg.du_min, m, Np, -np.inf)])
        b_max = np.concatenate([b_max, _horizon_bound(cfg.du_max, m, Np, np.inf)])
        b_shift = np.vstack([b_shift, np.zeros((m * Np, m))])

    layout = CondensedLayout(Np=Np, m=m, N=N, q=q, rate_rows=rate_rows)
    logger.debug(f"Condensed MPC: {layout.n_var} variables, {layout.n_con} constraints, "
                 f"cond(H) = {np.linalg.cond(H):.3e}")
    return CondensedQP(H=H, F=F, F_u=F_u, F_w=F_w, G=G, b_min=b_min, b_max=b_max,
                       b_shift=b_shift, layout=layout, Phi=Phi, M=M, Gamma_u=Gamma_u,
                       Lambda=Lam, W=W, T=T, R_bar=R_bar)


@dataclass(frozen=True)
class TrackingReference:
    """Output references r_1, r_2, ... as rows of a (length, q) array."""
    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        r = r.reshape(-1, 1) if r.ndim == 1 else r
        if r.ndim != 2 or r.shape[0] < 1:
            raise InvalidInputError("Reference needs at least one sample")
        if not np.all(np.isfinite(r)):
            raise InvalidInputError("Reference must be finite")
        object.__setattr__(self, "r", r)

    @classmethod
    def from_phi(cls, phi) -> "TrackingReference":
        """Tilt reference with zero tilt-rate reference."""
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        return cls(np.column_stack([phi, np.zeros_like(phi)]))

    def horizon(self, Np: int) -> np.ndarray:
        """First Np rows, holding the last one when the reference is shorter."""
        if len(self.r) >= Np:
            return self.r[:Np]
        tail = np.repeat(self.r[-1:], Np - len(self.r), axis=0)
        return np.vstack([self.r, tail])


def reference_window(signal: Signal, t: float, dt: float, Np: int) -> TrackingReference:
    """Sample a phi reference signal at t + dt, ..., t + Np dt."""
    times = t + dt * np.arange(1, Np + 1)
    return TrackingReference.from_phi([signal(float(tk)) for tk in times])


@dataclass
class SolverState:
    """Mutable per-loop state: solver workspace, warm start and disturbance estimate."""
    solver: AdmmSolver = field(default_factory=AdmmSolver)
    warm_dU: Optional[np.ndarray] = None
    w_hat: Optional[np.ndarray] = None


@dataclass
class MpcDiagnostics:
    status: QpStatus
    iterations: int
    degraded: bool
    dU: np.ndarray
    U: np.ndarray
    Y: np.ndarray
    objective: float


def mpc_step(qp: CondensedQP,
             z0: np.ndarray,
             u_prev,
             ref: TrackingReference,
             state: SolverState) -> Tuple[np.ndarray, MpcDiagnostics]:
    """Solve one receding-horizon problem and return the first input.

    Returns:
        (u, diagnostics) with u = u_prev + du_0 of length m

    Raises:
        InfeasibleProblemError: the solver certified infeasibility
    """
    lay = qp.layout
    if ref.r.shape[1] != lay.q:
        raise DimensionMismatchError(f"Reference has {ref.r.shape[1]} outputs, predictor has {lay.q}")
    r = ref.horizon(lay.Np).ravel()
    u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float)).ravel()
    w = state.w_hat

    problem = qp.problem(z0, r, u_prev, w)
    warm = (state.warm_dU, None) if state.warm_dU is not None else None
    sol = state.solver.solve(problem, warm_start=warm)
    if sol.status == QpStatus.INFEASIBLE:
        raise InfeasibleProblemError("MPC problem certified infeasible; check input and rate bounds")

    dU = sol.x
    U = qp.inputs(dU, u_prev)
    u = U[0].copy()
    degraded = not sol.solved
    if degraded:
        u = np.clip(u, qp.b_min[:lay.m], qp.b_max[:lay.m])
        logger.warning(f"Degraded MPC step ({sol.status.value} after {sol.iterations} iterations); "
                       f"applying clamped input {u}")

    state.warm_dU = np.concatenate([dU[lay.m:], np.zeros(lay.m)])
    diagnostics = MpcDiagnostics(
        status=sol.status,
        iterations=sol.iterations,
        degraded=degraded,
        dU=dU,
        U=U,
        Y=qp.outputs(dU, z0, u_prev, w),
        objective=qp.objective(dU, z0, r, u_prev, w),
    )
    return u, diagnostics


class KmpcController:
    """Receding-horizon controller: history buffer, disturbance estimate and warm-started QP."""

    def __init__(self,
                 pred: LiftedPredictor,
                 cfg: KmpcConfig,
                 reference: Signal = zero_signal,
                 settings: Optional[QpSettings] = None,
                 name: str = "kmpc"):
        if pred.spec is None:
            raise InvalidInputError("Predictor has no lifting specification")
        self.pred = pred
        self.cfg = cfg
        self.reference = reference
        self.settings = settings or QpSettings()
        self.name = name
        self.qp = condense(pred, cfg)
        self.reset()

    def reset(self) -> None:
        self.buffer = HistoryBuffer.empty(self.pred.spec)
        self.state = SolverState(solver=AdmmSolver(self.settings),
                                 w_hat=np.zeros(self.pred.N))
        self.last_z: Optional[np.ndarray] = None
        self.last_diagnostics: Optional[MpcDiagnostics] = None

    def observe(self, m, u_prev: float) -> None:
        self.buffer = self.buffer.push(m, u_prev)
        if not self.buffer.ready:
            return
        z = lift(self.buffer, self.pred.spec)
        lam = self.cfg.disturbance_gain
        if self.last_z is not None and lam > 0.0:
            innovation = z - self.pred.A @ self.last_z - self.pred.B @ np.atleast_1d(u_prev)
            self.state.w_hat = (1.0 - lam) * self.state.w_hat + lam * innovation
        self.last_z = z

    def act(self, m, u_prev: float, t: float) -> ControlAction:
        self.observe(m, u_prev)
        if not self.buffer.ready:
            return ControlAction(u=0.0, status="warmup")
        ref = reference_window(self.reference, t, self.pred.dt, self.cfg.Np)
        u, diagnostics = mpc_step(self.qp, self.last_z, u_prev, ref, self.state)
        self.last_diagnostics = diagnostics
        return ControlAction(u=float(u[0]), iterations=diagnostics.iterations,
                             status=diagnostics.status.value)


def track(pred: LiftedPredictor,
          cfg: KmpcConfig,
          session: PlantSession,
          reference: Signal,
          duration: float,
          settings: Optional[QpSettings] = None,
          monitor=None) -> ExperimentResult:
    """Closed-loop KMPC tracking of a phi reference (tilt-rate reference zero)."""
    controller = KmpcController(pred, cfg, reference=reference, settings=settings)
    return run_closed_loop(session, controller, duration, reference=reference,
                           name="track", monitor=monitor)
