"""
Discrete-time LQR on the lifted predictor.

The gain minimizes sum(z_k' Q z_k + u_k' R u_k) subject to z_{k+1} = A z_k + B u_k,
where Q only weights the original outputs of the newest delay block.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from src.control.closed_loop import ControlAction
from src.errors import (
    ConvergenceError,
    DimensionMismatchError,
    InvalidInputError,
    NumericalError,
    StabilizabilityError,
)
from src.identification.edmd import LiftedPredictor
from src.identification.lifting import HistoryBuffer, LiftingSpec, lift

logger = logging.getLogger(__name__)

DARE_TOL = 1e-12
DARE_MAX_ITER = 100_000


@dataclass(frozen=True)
class LqrDesign:
    """State-feedback design u = -K z."""
    Q: np.ndarray
    R: np.ndarray
    K: np.ndarray
    P: np.ndarray
    iterations: int = 0
    spectral_radius: float = 0.0


def _as_matrices(A, B, Q, R):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    B = B.reshape(-1, 1) if B.ndim < 2 else B
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n, m = A.shape[0], B.shape[1]
    if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n) or R.shape != (m, m):
        raise DimensionMismatchError(
            f"Incompatible shapes A{A.shape} B{B.shape} Q{Q.shape} R{R.shape}"
        )
    return A, B, Q, R


def gain(A: np.ndarray, B: np.ndarray, P: np.ndarray, R: np.ndarray) -> np.ndarray:
    """K = (R + B'PB)^-1 B'PA."""
    A, B, P, R = _as_matrices(A, B, P, R)
    S = R + B.T @ P @ B
    try:
        return linalg.solve(S, B.T @ P @ A, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"R + B'PB is singular: {e}") from e


def closed_loop_radius(A: np.ndarray, B: np.ndarray, K: np.ndarray) -> float:
    """Spectral radius of A - B K."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    K = np.asarray(K, dtype=float).reshape(B.shape[1], A.shape[0])
    return float(np.max(np.abs(linalg.eigvals(A - B @ K))))


def riccati_residual(A, B, Q, R, P) -> float:
    """Frobenius norm of the DARE residual at P."""
    A, B, Q, R = _as_matrices(A, B, Q, R)
    BtPA = B.T @ P @ A
    correction = BtPA.T @ linalg.solve(R + B.T @ P @ B, BtPA, assume_a="pos")
    return float(np.linalg.norm(P - A.T @ P @ A + correction - Q))


def riccati_iteration(A: np.ndarray,
                      B: np.ndarray,
                      Q: np.ndarray,
                      R: np.ndarray,
                      tol: float = DARE_TOL,
                      max_iter: int = DARE_MAX_ITER) -> Tuple[np.ndarray, int]:
    """Stabilizing DARE solution and the number of fixed-point iterations it took.

    Raises:
        ConvergenceError: no fixed point within max_iter (carries the last step size)
        StabilizabilityError: the resulting closed loop is not Schur stable
    """
    A, B, Q, R = _as_matrices(A, B, Q, R)
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(B)):
        raise InvalidInputError("A and B must be finite")
    try:
        linalg.cholesky(R)
    except linalg.LinAlgError as e:
        raise InvalidInputError("R must be positive definite") from e

    P = 0.5 * (Q + Q.T)
    step = np.inf
    for iteration in range(1, max_iter + 1):
        BtPA = B.T @ P @ A
        P_next = A.T @ P @ A - BtPA.T @ linalg.solve(R + B.T @ P @ B, BtPA, assume_a="pos") + Q
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)):
            raise ConvergenceError(f"Riccati iteration diverged at iteration {iteration}", residual=np.inf)
        step = float(np.linalg.norm(P_next - P))
        P = P_next
        if step <= tol * (1.0 + float(np.linalg.norm(P))):
            break
    else:
        raise ConvergenceError(
            f"Riccati iteration did not converge in {max_iter} iterations (last step {step:.3e})",
            residual=step,
        )

    K = gain(A, B, P, R)
    radius = closed_loop_radius(A, B, K)
    if radius >= 1.0:
        raise StabilizabilityError(
            f"Closed loop spectral radius {radius:.6f} >= 1; (A, B) is not stabilizable",
            spectral_radius=radius,
        )
    logger.debug(f"DARE converged in {iteration} iterations, closed-loop radius {radius:.6f}")
    return P, iteration


def solve_dare(A: np.ndarray,
               B: np.ndarray,
               Q: np.ndarray,
               R: np.ndarray,
               tol: float = DARE_TOL,
               max_iter: int = DARE_MAX_ITER) -> np.ndarray:
    """Stabilizing DARE solution by Riccati fixed-point iteration from P = Q."""
    P, _ = riccati_iteration(A, B, Q, R, tol=tol, max_iter=max_iter)
    return P


def output_penalty(spec: LiftingSpec, q_phi: float, q_phidot: float) -> np.ndarray:
    """Q that weights only phi and phi_dot of the newest block."""
    Q = np.zeros((spec.lifted_dim, spec.lifted_dim))
    i_phi, i_phidot = spec.output_indices
    Q[i_phi, i_phi] = q_phi
    Q[i_phidot, i_phidot] = q_phidot
    return Q


def design_lqr(pred: LiftedPredictor,
               q_phi: float = 10.0,
               q_phidot: float = 1.0,
               r: float = 100.0,
               tol: float = DARE_TOL,
               max_iter: int = DARE_MAX_ITER) -> LqrDesign:
    """Design the lifted LQR for a fitted predictor."""
    if pred.spec is None:
        raise InvalidInputError("Predictor has no lifting specification")
    if q_phi < 0 or q_phidot < 0:
        raise InvalidInputError("Output penalties must be non-negative")
    Q = output_penalty(pred.spec, q_phi, q_phidot)
    R = np.eye(pred.m) * r
    P, iterations = riccati_iteration(pred.A, pred.B, Q, R, tol=tol, max_iter=max_iter)
    K = gain(pred.A, pred.B, P, R)

    open_loop = float(np.max(np.abs(linalg.eigvals(pred.A))))
    radius = closed_loop_radius(pred.A, pred.B, K)
    logger.info(f"LQR designed in {iterations} Riccati iterations: open-loop radius {open_loop:.5f}, "
                f"closed-loop radius {radius:.5f}")
    return LqrDesign(Q=Q, R=R, K=K, P=P, iterations=iterations, spectral_radius=radius)


def saturate(u: float, limit: float) -> float:
    return float(np.clip(u, -limit, limit))


def lqr_control(K: np.ndarray,
                buffer: HistoryBuffer,
                spec: LiftingSpec,
                limit: float,
                z: Optional[np.ndarray] = None) -> float:
    """u = clamp(-K lift(buffer)); zero until the history is full."""
    if not buffer.ready:
        return 0.0
    if z is None:
        z = lift(buffer, spec)
    K = np.asarray(K, dtype=float).reshape(-1, spec.lifted_dim)
    return saturate(float(-(K @ z)[0]), limit)


class LqrController:
    """Lifted LQR in the closed-loop runner; outputs zero until the history is full."""

    def __init__(self, K: np.ndarray, spec: LiftingSpec, limit: float, name: str = "lqr"):
        self.K = np.asarray(K, dtype=float).reshape(-1, spec.lifted_dim)
        self.spec = spec
        self.limit = limit
        self.name = name
        self.buffer = HistoryBuffer.empty(spec)

    def reset(self) -> None:
        self.buffer = HistoryBuffer.empty(self.spec)

    def observe(self, m, u_prev: float) -> None:
        self.buffer = self.buffer.push(m, u_prev)

    def act(self, m, u_prev: float, t: float) -> ControlAction:
        self.observe(m, u_prev)
        if not self.buffer.ready:
            return ControlAction(u=0.0, status="warmup")
        return ControlAction(u=lqr_control(self.K, self.buffer, self.spec, self.limit), status="ok")
