"""
Extended dynamic mode decomposition with control.

Snapshot pairs from several trajectories are stacked column-wise and the
lifted linear predictor

    z_{k+1} = A z_k + B u_k,    y_k = C z_k

is fitted as two independent least-squares problems.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from src.errors import (
    DegenerateDataError,
    DimensionMismatchError,
    EmptyDatasetError,
    InvalidInputError,
)
from src.identification.lifting import (
    LiftingSpec,
    TrajectoryLike,
    as_trajectory,
    lift_trajectory,
    lifted_states,
)
from src.plant.trajectory import Trajectory

logger = logging.getLogger(__name__)

PINV_RTOL = 1e-10
DEFAULT_RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class SnapshotDataset:
    """Column-aligned snapshot matrices.

    Y, Y_plus: q x p raw outputs and successors
    Y_lift, Y_plus_lift: N x p lifted states and successors
    Omega: m x p inputs
    """
    Y: np.ndarray
    Y_plus: np.ndarray
    Y_lift: np.ndarray
    Y_plus_lift: np.ndarray
    Omega: np.ndarray
    spec: Optional[LiftingSpec] = None
    dt: float = 1.0
    trajectories: int = 1

    def __post_init__(self):
        for name in ("Y", "Y_plus", "Y_lift", "Y_plus_lift", "Omega"):
            value = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, value)
        columns = {getattr(self, name).shape[1]
                   for name in ("Y", "Y_plus", "Y_lift", "Y_plus_lift", "Omega")}
        if len(columns) != 1:
            raise DimensionMismatchError(f"Snapshot matrices disagree on column count: {sorted(columns)}")
        if self.Y.shape != self.Y_plus.shape or self.Y_lift.shape != self.Y_plus_lift.shape:
            raise DimensionMismatchError("Snapshot and successor matrices have different shapes")
        if self.spec is not None and self.Y_lift.shape[0] != self.spec.lifted_dim:
            raise DimensionMismatchError(
                f"Y_lift has {self.Y_lift.shape[0]} rows, lifting defines {self.spec.lifted_dim}"
            )

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    @property
    def lifted_dim(self) -> int:
        return self.Y_lift.shape[0]

    @property
    def input_dim(self) -> int:
        return self.Omega.shape[0]


@dataclass(frozen=True)
class FitReport:
    """Diagnostics recorded by `fit`."""
    pairs: int
    residual_dynamics: float
    residual_output: float
    ridge: float
    rank: int
    truncated: bool
    condition: float


@dataclass(frozen=True)
class LiftedPredictor:
    """Lifted linear predictor (A, B, C) with the lifting that produced it."""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    spec: Optional[LiftingSpec] = None
    dt: float = 1.0
    fit_report: Optional[FitReport] = field(default=None, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        B = B.reshape(-1, 1) if B.ndim == 1 else B
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        N = A.shape[0]
        if A.shape != (N, N) or B.shape[0] != N or C.shape[1] != N:
            raise DimensionMismatchError(
                f"Inconsistent predictor shapes A{A.shape} B{B.shape} C{C.shape}"
            )
        if self.spec is not None and self.spec.lifted_dim != N:
            raise DimensionMismatchError(
                f"Predictor has N={N}, lifting with delays={self.spec.delays} gives {self.spec.lifted_dim}"
            )
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(C))):
            raise InvalidInputError("Predictor matrices contain non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]


def _default_dt(trajectories: Sequence[Trajectory]) -> float:
    for trajectory in trajectories:
        if len(trajectory) > 1:
            return float(np.median(np.diff(trajectory.t)))
    return 1.0


def assemble(trajectories: Sequence[TrajectoryLike],
             spec: LiftingSpec,
             dt: Optional[float] = None) -> SnapshotDataset:
    """Stack snapshot pairs from every trajectory into one dataset.

    Args:
        trajectories: Trajectories or (Measurement, u) sequences
        spec: Lifting specification
        dt: Sample period; inferred from the time column when omitted

    Returns:
        SnapshotDataset with p equal to the total pair count

    Raises:
        EmptyDatasetError: no trajectory yields a pair
    """
    trajectories = [as_trajectory(t) for t in trajectories]
    blocks = [lift_trajectory(t, spec) for t in trajectories]
    blocks = [b for b in blocks if b.pairs > 0]
    if not blocks:
        raise EmptyDatasetError(
            f"No snapshot pairs from {len(trajectories)} trajectories with delays={spec.delays}"
        )

    dataset = SnapshotDataset(
        Y=np.hstack([b.Y for b in blocks]),
        Y_plus=np.hstack([b.Y_plus for b in blocks]),
        Y_lift=np.hstack([b.Z for b in blocks]),
        Y_plus_lift=np.hstack([b.Z_plus for b in blocks]),
        Omega=np.hstack([b.U for b in blocks]),
        spec=spec,
        dt=dt if dt is not None else _default_dt(trajectories),
        trajectories=len(blocks),
    )
    logger.info(f"Assembled {dataset.p} snapshot pairs from {len(blocks)} trajectories (N={spec.lifted_dim})")
    return dataset


def default_ridge(X: np.ndarray) -> float:
    """1e-8 times the mean diagonal of the Gram matrix X X^T."""
    return DEFAULT_RIDGE_SCALE * float(np.einsum("ij,ij->", X, X)) / X.shape[0]


def _least_squares(target: np.ndarray,
                   X: np.ndarray,
                   ridge: float,
                   rtol: float) -> Tuple[np.ndarray, int]:
    """argmin_M ||target - M X||_F^2 + ridge ||M||_F^2 and the rank used."""
    if ridge > 0:
        gram = X @ X.T
        gram[np.diag_indices_from(gram)] += ridge
        solution = linalg.solve(gram, X @ target.T, assume_a="pos")
        return solution.T, X.shape[0]
    X_pinv, rank = linalg.pinv(X, atol=0.0, rtol=rtol, return_rank=True)
    return target @ X_pinv, int(rank)


def fit(data: SnapshotDataset,
        ridge: Optional[float] = 0.0,
        rtol: float = PINV_RTOL) -> LiftedPredictor:
    """Fit [A B] on the lifted pairs and C on the raw outputs.

    Args:
        data: Snapshot dataset
        ridge: Tikhonov weight; 0 uses the truncated pseudoinverse, None picks
            1e-8 * trace(Gram) / rows
        rtol: Singular values below rtol * sigma_max are dropped when ridge=0

    Returns:
        LiftedPredictor carrying a FitReport
    """
    N, m = data.lifted_dim, data.input_dim
    X = np.vstack([data.Y_lift, data.Omega])
    if ridge is None:
        ridge = default_ridge(X)
    if ridge < 0 or not np.isfinite(ridge):
        raise InvalidInputError(f"ridge must be finite and >= 0, got {ridge}")
    if data.p < N + m:
        logger.warning(f"Only {data.p} pairs for {N + m} regressors; fit is underdetermined")

    AB, rank = _least_squares(data.Y_plus_lift, X, ridge, rtol)
    C, _ = _least_squares(data.Y, data.Y_lift, ridge, rtol)
    A, B = AB[:, :N], AB[:, N:]

    truncated = ridge == 0 and rank < X.shape[0]
    if truncated:
        logger.warning(f"Regressor matrix rank {rank} < {X.shape[0]}; using truncated pseudoinverse")

    singular = linalg.svdvals(X)
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else float("inf")
    report = FitReport(
        pairs=data.p,
        residual_dynamics=float(np.linalg.norm(data.Y_plus_lift - AB @ X)),
        residual_output=float(np.linalg.norm(data.Y - C @ data.Y_lift)),
        ridge=float(ridge),
        rank=rank,
        truncated=truncated,
        condition=condition,
    )
    logger.info(
        f"EDMD fit: p={report.pairs}, ridge={report.ridge:.3g}, rank={report.rank}, "
        f"residual={report.residual_dynamics:.3e}, output residual={report.residual_output:.3e}"
    )
    return LiftedPredictor(A=A, B=B, C=C, spec=data.spec, dt=data.dt, fit_report=report)


def predict(pred: LiftedPredictor, z0: np.ndarray, u_seq: Sequence[float]) -> np.ndarray:
    """Roll the predictor forward.

    Returns:
        Array of shape (len(u_seq) + 1, q); row 0 is C z0
    """
    z = np.asarray(z0, dtype=float).ravel()
    if z.shape != (pred.N,):
        raise DimensionMismatchError(f"z0 has length {z.size}, predictor expects {pred.N}")
    u_seq = np.asarray(u_seq, dtype=float).reshape(-1, pred.m)

    outputs = np.empty((len(u_seq) + 1, pred.q))
    outputs[0] = pred.C @ z
    for k, u in enumerate(u_seq):
        z = pred.A @ z + pred.B @ u
        outputs[k + 1] = pred.C @ z
    return outputs


def _normalizer(trajectory: Trajectory) -> np.ndarray:
    std = trajectory.outputs.std(axis=1)
    if np.any(std < 1e-12):
        raise DegenerateDataError(
            f"Held-out trajectory '{trajectory.name}' has zero output variance; NRMSE undefined"
        )
    return std


def _start_count(trajectory: Trajectory, spec: LiftingSpec, horizon: int) -> int:
    if horizon < 1:
        raise InvalidInputError(f"horizon must be >= 1, got {horizon}")
    starts = len(trajectory) - spec.delays - horizon
    if starts < 1:
        raise InvalidInputError(
            f"Trajectory '{trajectory.name}' of length {len(trajectory)} is too short for "
            f"delays={spec.delays} and horizon={horizon}"
        )
    return starts


def evaluate(pred: LiftedPredictor, heldout: TrajectoryLike, horizon: int) -> np.ndarray:
    """k-step NRMSE for k = 1..horizon, averaged over every valid start index.

    Each output component's RMSE is divided by that component's standard
    deviation over the held-out trajectory; the components are then averaged.
    """
    if pred.spec is None:
        raise InvalidInputError("Predictor has no lifting specification")
    heldout = as_trajectory(heldout)
    spec = pred.spec
    std = _normalizer(heldout)
    starts = _start_count(heldout, spec, horizon)
    s = spec.delays
    outputs = heldout.outputs

    Z = lifted_states(heldout, spec)[:, :starts]
    nrmse = np.empty(horizon)
    for h in range(1, horizon + 1):
        Z = pred.A @ Z + pred.B @ heldout.u[s + h - 1:s + h - 1 + starts].reshape(1, -1)
        error = pred.C @ Z - outputs[:, s + h:s + h + starts]
        rmse = np.sqrt(np.mean(error ** 2, axis=1))
        nrmse[h - 1] = float(np.mean(rmse / std))
    logger.debug(f"Predictor NRMSE on '{heldout.name}': step1={nrmse[0]:.4f}, step{horizon}={nrmse[-1]:.4f}")
    return nrmse


def evaluate_baseline(heldout: TrajectoryLike, spec: LiftingSpec, horizon: int) -> np.ndarray:
    """NRMSE of the zero-order-hold guess y_{k+h} = y_k, on the same start indices as `evaluate`."""
    heldout = as_trajectory(heldout)
    std = _normalizer(heldout)
    starts = _start_count(heldout, spec, horizon)
    s = spec.delays
    outputs = heldout.outputs

    held = outputs[:, s:s + starts]
    nrmse = np.empty(horizon)
    for h in range(1, horizon + 1):
        error = held - outputs[:, s + h:s + h + starts]
        nrmse[h - 1] = float(np.mean(np.sqrt(np.mean(error ** 2, axis=1)) / std))
    return nrmse


def split_heldout(trajectories: Sequence[Trajectory]) -> Tuple[List[Trajectory], Trajectory]:
    """Reserve the last trajectory for evaluation."""
    trajectories = list(trajectories)
    if len(trajectories) < 2:
        raise InvalidInputError("Need at least two trajectories to hold one out")
    return trajectories[:-1], trajectories[-1]
