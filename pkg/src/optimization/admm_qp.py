"""
Dense ADMM operator-splitting solver for strictly convex QPs

    minimize    1/2 x'Hx + f'x
    subject to  b_min <= Gx <= b_max

The iteration follows the usual splitting with z = Gx: a regularized
linear solve for x, over-relaxation, projection of z onto the box and a dual
ascent step on y. Data are Ruiz-equilibrated once per (H, G) pair and the
KKT factorization is cached so that repeated solves with new f and bounds
(the receding-horizon case) only pay for the iterations.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from src.errors import DimensionMismatchError, InvalidInputError

logger = logging.getLogger(__name__)

QP_INFTY = 1e20
SCALING_REG = 1e-4
RHO_MIN = 1e-6
RHO_EQ_SCALE = 1e3


class QpStatus(str, Enum):
    SOLVED = "solved"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QpProblem:
    """Problem data; bounds may contain +/- infinity."""
    H: np.ndarray
    f: np.ndarray
    G: np.ndarray
    b_min: np.ndarray
    b_max: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        f = np.asarray(self.f, dtype=float).ravel()
        n = H.shape[0]
        G = np.asarray(self.G, dtype=float).reshape(-1, n)
        b_min = np.asarray(self.b_min, dtype=float).ravel()
        b_max = np.asarray(self.b_max, dtype=float).ravel()
        c = G.shape[0]

        if H.shape != (n, n) or f.shape != (n,):
            raise DimensionMismatchError(f"H{H.shape} and f{f.shape} do not agree")
        if b_min.shape != (c,) or b_max.shape != (c,):
            raise DimensionMismatchError(
                f"G has {c} rows but bounds have {b_min.size} and {b_max.size} entries"
            )
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(f)) and np.all(np.isfinite(G))):
            raise InvalidInputError("H, f and G must be finite")
        if np.any(np.isnan(b_min)) or np.any(np.isnan(b_max)):
            raise InvalidInputError("Bounds must not be NaN")
        if np.max(np.abs(H - H.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(H), initial=0.0)):
            raise InvalidInputError("H is not symmetric")
        if np.any(b_min > b_max):
            raise InvalidInputError("b_min must not exceed b_max")

        for name, value in (("H", H), ("f", f), ("G", G), ("b_min", b_min), ("b_max", b_max)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def c(self) -> int:
        return self.G.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.H @ x + self.f @ x)

    def violation(self, x: np.ndarray) -> float:
        """Largest bound violation of Gx."""
        if self.c == 0:
            return 0.0
        g = self.G @ x
        return float(np.max(np.maximum(0.0, np.maximum(g - self.b_max, self.b_min - g))))


@dataclass
class QpSettings:
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    eps_prim_inf: float = 1e-5
    max_iter: int = 4000
    infeasibility_interval: int = 100
    scaling_iter: int = 15
    polish: bool = True
    polish_delta: float = 1e-9
    polish_refine_iter: int = 3
    record_trace: bool = False


@dataclass
class QpSolution:
    x: np.ndarray
    y: np.ndarray
    status: QpStatus
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    polished: bool = False
    trace: Optional[List[float]] = field(default=None, repr=False)

    @property
    def solved(self) -> bool:
        return self.status == QpStatus.SOLVED


@dataclass(frozen=True)
class KktReport:
    """Optimality residuals of a primal/dual pair."""
    stationarity: float
    primal_violation: float
    complementarity: float

    @property
    def worst(self) -> float:
        return max(self.stationarity, self.primal_violation, self.complementarity)


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v), initial=0.0))


@dataclass
class _Scaling:
    D: np.ndarray
    E: np.ndarray
    c: float


@dataclass
class _Workspace:
    """Scaled problem matrices and the factored KKT system for one (H, G) pair."""
    H: np.ndarray
    G: np.ndarray
    scaling: _Scaling
    P: np.ndarray
    A: np.ndarray
    factor: Tuple[np.ndarray, bool]
    rho_vec: np.ndarray
    equality: np.ndarray


class AdmmSolver:
    """ADMM QP solver holding a reusable workspace.

    One solve at a time per instance; instances are independent.
    """

    def __init__(self, settings: Optional[QpSettings] = None):
        self.settings = settings or QpSettings()
        self._work: Optional[_Workspace] = None
        self.setups = 0

    def _equilibrate(self, H: np.ndarray, G: np.ndarray) -> _Scaling:
        """Ruiz equilibration of the KKT matrix [[H, G'], [G, 0]] in the inf-norm."""
        n, c = H.shape[0], G.shape[0]
        KKT = np.zeros((n + c, n + c))
        KKT[:n, :n] = H
        KKT[:n, n:] = G.T
        KKT[n:, :n] = G

        d = np.ones(n + c)
        for _ in range(self.settings.scaling_iter):
            norms = np.max(np.abs(KKT), axis=0, initial=0.0)
            d_temp = np.where(norms > SCALING_REG, 1.0 / np.sqrt(np.maximum(norms, SCALING_REG)), 1.0)
            d = np.clip(d * d_temp, 1e-4, 1e4)
            KKT = d_temp[:, None] * KKT * d_temp[None, :]

        D, E = d[:n], d[n:]
        P_scaled = D[:, None] * H * D[None, :]
        mean_col = float(np.mean(np.max(np.abs(P_scaled), axis=0)))
        c_cost = 1.0 / mean_col if mean_col > SCALING_REG else 1.0
        return _Scaling(D=D, E=E, c=float(np.clip(c_cost, 1e-4, 1e4)))

    def _setup(self, problem: QpProblem) -> _Workspace:
        work = self._work
        if work is not None and np.array_equal(work.H, problem.H) and np.array_equal(work.G, problem.G):
            return work

        scaling = self._equilibrate(problem.H, problem.G)
        D, E, c = scaling.D, scaling.E, scaling.c
        P = c * (D[:, None] * problem.H * D[None, :])
        A = E[:, None] * problem.G * D[None, :]
        try:
            linalg.cholesky(problem.H)
        except linalg.LinAlgError as e:
            raise InvalidInputError("H must be positive definite") from e

        self.setups += 1
        work = _Workspace(H=problem.H.copy(), G=problem.G.copy(), scaling=scaling, P=P, A=A,
                          factor=(np.zeros((0, 0)), False), rho_vec=np.zeros(problem.c),
                          equality=np.zeros(problem.c, dtype=bool))
        self._work = work
        return work

    def _refactor(self, work: _Workspace, l: np.ndarray, u: np.ndarray):
        """Set per-row penalties and factor P + sigma I + A' diag(rho) A when they change."""
        rho = self.settings.rho
        free = (l <= -QP_INFTY) & (u >= QP_INFTY)
        equality = (u - l) < 1e-4
        rho_vec = np.where(free, RHO_MIN, np.where(equality, RHO_EQ_SCALE * rho, rho))
        if work.factor[0].size and np.array_equal(rho_vec, work.rho_vec):
            return
        n = work.P.shape[0]
        M = work.P + self.settings.sigma * np.eye(n) + work.A.T @ (rho_vec[:, None] * work.A)
        work.factor = linalg.cho_factor(M)
        work.rho_vec = rho_vec
        work.equality = equality

    def solve(self,
              problem: QpProblem,
              warm_start: Optional[Tuple[np.ndarray, Optional[np.ndarray]]] = None) -> QpSolution:
        """Run ADMM on `problem`.

        Args:
            problem: QP data
            warm_start: Optional (x, y) in the original (unscaled) variables;
                y may be None

        Returns:
            QpSolution; at max_iter the lowest-objective primal-feasible iterate
            is returned when one was seen
        """
        s = self.settings
        work = self._setup(problem)
        D, E, c = work.scaling.D, work.scaling.E, work.scaling.c

        l = E * np.clip(problem.b_min, -QP_INFTY, QP_INFTY)
        u = E * np.clip(problem.b_max, -QP_INFTY, QP_INFTY)
        l = np.where(problem.b_min <= -QP_INFTY, -QP_INFTY, l)
        u = np.where(problem.b_max >= QP_INFTY, QP_INFTY, u)
        q = c * D * problem.f
        self._refactor(work, np.where(problem.b_min <= -QP_INFTY, -QP_INFTY, problem.b_min),
                       np.where(problem.b_max >= QP_INFTY, QP_INFTY, problem.b_max))
        rho_vec, P, A = work.rho_vec, work.P, work.A

        if warm_start is not None:
            x0, y0 = warm_start
            x_bar = np.asarray(x0, dtype=float).ravel() / D
            y_bar = (c * np.asarray(y0, dtype=float).ravel() / E
                     if y0 is not None else np.zeros(problem.c))
            if x_bar.shape != (problem.n,) or y_bar.shape != (problem.c,):
                raise DimensionMismatchError("Warm start does not match problem dimensions")
            z_bar = np.clip(A @ x_bar, l, u)
        else:
            x_bar = np.zeros(problem.n)
            z_bar = np.zeros(problem.c)
            y_bar = np.zeros(problem.c)

        status = QpStatus.MAX_ITER
        best_x, best_y, best_obj = None, None, np.inf
        trace: Optional[List[float]] = [] if s.record_trace else None
        y_window = y_bar.copy()
        x = D * x_bar
        y = E * y_bar / c
        pri_res = dua_res = np.inf
        iteration = 0

        for iteration in range(1, s.max_iter + 1):
            rhs = s.sigma * x_bar - q + A.T @ (rho_vec * z_bar - y_bar)
            x_tilde = linalg.cho_solve(work.factor, rhs)
            z_tilde = A @ x_tilde

            x_bar = s.alpha * x_tilde + (1.0 - s.alpha) * x_bar
            z_relaxed = s.alpha * z_tilde + (1.0 - s.alpha) * z_bar
            z_bar = np.clip(z_relaxed + y_bar / rho_vec, l, u)
            y_bar = y_bar + rho_vec * (z_relaxed - z_bar)

            x = D * x_bar
            z = z_bar / E
            y = E * y_bar / c

            Gx = problem.G @ x
            Hx = problem.H @ x
            Gty = problem.G.T @ y
            pri_res = _inf_norm(Gx - z)
            dua_res = _inf_norm(Hx + problem.f + Gty)

            objective = float(0.5 * x @ Hx + problem.f @ x)
            if objective < best_obj and problem.violation(x) <= 10.0 * s.eps_abs:
                best_x, best_y, best_obj = x.copy(), y.copy(), objective
            if trace is not None:
                trace.append(best_obj)

            eps_pri = s.eps_abs + s.eps_rel * max(_inf_norm(Gx), _inf_norm(z))
            eps_dua = s.eps_abs + s.eps_rel * max(_inf_norm(Hx), _inf_norm(Gty), _inf_norm(problem.f))
            if logger.isEnabledFor(logging.DEBUG) and iteration % 100 == 0:
                logger.debug(f"iter {iteration}: pri={pri_res:.3e} dua={dua_res:.3e} obj={objective:.6e}")

            if pri_res <= eps_pri and dua_res <= eps_dua:
                status = QpStatus.SOLVED
                break

            if iteration % s.infeasibility_interval == 0:
                if self._primal_infeasible(problem, E * (y_bar - y_window) / c):
                    status = QpStatus.INFEASIBLE
                    break
                y_window = y_bar.copy()

        polished = False
        if status == QpStatus.SOLVED and s.polish and problem.c > 0:
            polished_result = self._polish(problem, x, z_bar / E, y, pri_res, dua_res)
            if polished_result is not None:
                x, y, pri_res, dua_res = polished_result
                polished = True
        elif status == QpStatus.MAX_ITER and best_x is not None:
            x, y = best_x, best_y
            pri_res = problem.violation(x)
            dua_res = _inf_norm(problem.H @ x + problem.f + problem.G.T @ y)

        if status == QpStatus.MAX_ITER:
            logger.warning(f"ADMM hit max_iter={s.max_iter} (pri={pri_res:.3e}, dua={dua_res:.3e})")
        elif status == QpStatus.INFEASIBLE:
            logger.warning(f"ADMM found a primal infeasibility certificate after {iteration} iterations")

        return QpSolution(
            x=x, y=y, status=status, iterations=iteration,
            primal_residual=float(pri_res), dual_residual=float(dua_res),
            objective=problem.objective(x) if status != QpStatus.INFEASIBLE else np.inf,
            polished=polished, trace=trace,
        )

    def _primal_infeasible(self, problem: QpProblem, delta_y: np.ndarray) -> bool:
        """Certificate test: G'v = 0 and b_max'v+ + b_min'v- < 0 for v = delta_y / |delta_y|."""
        eps = self.settings.eps_prim_inf
        norm = _inf_norm(delta_y)
        if norm <= eps:
            return False
        v = delta_y / norm
        upper = np.clip(problem.b_max, -QP_INFTY, QP_INFTY)
        lower = np.clip(problem.b_min, -QP_INFTY, QP_INFTY)
        lhs = float(upper @ np.maximum(v, 0.0) + lower @ np.minimum(v, 0.0))
        if lhs >= -eps:
            return False
        return _inf_norm(problem.G.T @ v) < eps

    def _polish(self,
                problem: QpProblem,
                x: np.ndarray,
                z: np.ndarray,
                y: np.ndarray,
                pri_res: float,
                dua_res: float) -> Optional[Tuple[np.ndarray, np.ndarray, float, float]]:
        """Solve the equality-constrained QP on the guessed active set.

        Returns None when the polished point does not improve on the ADMM point.
        """
        s = self.settings
        n = problem.n
        lower = np.flatnonzero(z - problem.b_min < -y)
        upper = np.flatnonzero(problem.b_max - z < y)
        active = np.concatenate([lower, upper])
        G_red = problem.G[active]
        k = len(active)

        KKT = np.zeros((n + k, n + k))
        KKT[:n, :n] = problem.H
        KKT[:n, n:] = G_red.T
        KKT[n:, :n] = G_red
        KKT_reg = KKT.copy()
        KKT_reg[:n, :n] += s.polish_delta * np.eye(n)
        KKT_reg[n:, n:] -= s.polish_delta * np.eye(k)
        rhs = np.concatenate([-problem.f, problem.b_min[lower], problem.b_max[upper]])

        try:
            lu = linalg.lu_factor(KKT_reg)
            sol = linalg.lu_solve(lu, rhs)
            for _ in range(s.polish_refine_iter):
                sol = sol + linalg.lu_solve(lu, rhs - KKT @ sol)
        except (linalg.LinAlgError, ValueError):
            logger.debug("Polish KKT system is singular; keeping ADMM solution")
            return None

        x_pol = sol[:n]
        y_pol = np.zeros(problem.c)
        y_pol[active] = sol[n:]
        if not np.all(np.isfinite(sol)):
            return None

        # active multipliers must have the sign of their bound
        equality = problem.b_max - problem.b_min < 1e-12
        tol = max(s.eps_abs, 1e-9)
        if np.any((y_pol[lower] > tol) & ~equality[lower]) or np.any((y_pol[upper] < -tol) & ~equality[upper]):
            return None

        pol_pri = problem.violation(x_pol)
        pol_dua = _inf_norm(problem.H @ x_pol + problem.f + problem.G.T @ y_pol)
        improved = ((pol_pri < pri_res and pol_dua < dua_res)
                    or (pol_pri < pri_res and dua_res < 1e-10)
                    or (pol_dua < dua_res and pri_res < 1e-10))
        if not improved:
            logger.debug(f"Polish rejected (pri {pol_pri:.2e} vs {pri_res:.2e}, dua {pol_dua:.2e} vs {dua_res:.2e})")
            return None
        return x_pol, y_pol, pol_pri, pol_dua


def solve(problem: QpProblem,
          warm_start: Optional[Tuple[np.ndarray, Optional[np.ndarray]]] = None,
          eps_abs: float = 1e-6,
          eps_rel: float = 1e-6,
          max_iter: int = 4000,
          **overrides) -> QpSolution:
    """One-off solve with a fresh workspace."""
    settings = QpSettings(eps_abs=eps_abs, eps_rel=eps_rel, max_iter=max_iter, **overrides)
    return AdmmSolver(settings).solve(problem, warm_start=warm_start)


def kkt_check(problem: QpProblem, x: np.ndarray, duals: Optional[np.ndarray] = None) -> KktReport:
    """Stationarity, primal violation and complementarity of (x, duals).

    Duals follow the solver convention: positive on upper-active rows,
    negative on lower-active rows.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (problem.n,):
        raise DimensionMismatchError(f"x has {x.size} entries, problem has {problem.n}")
    y = np.zeros(problem.c) if duals is None else np.asarray(duals, dtype=float).ravel()
    if y.shape != (problem.c,):
        raise DimensionMismatchError(f"duals have {y.size} entries, problem has {problem.c} rows")

    stationarity = _inf_norm(problem.H @ x + problem.f + problem.G.T @ y)
    g = problem.G @ x
    with np.errstate(invalid="ignore"):
        upper_gap = np.where(np.maximum(y, 0.0) > 0, np.abs(problem.b_max - g), 0.0)
        lower_gap = np.where(np.maximum(-y, 0.0) > 0, np.abs(g - problem.b_min), 0.0)
    complementarity = _inf_norm(np.maximum(y, 0.0) * upper_gap + np.maximum(-y, 0.0) * lower_gap)
    return KktReport(
        stationarity=stationarity,
        primal_violation=problem.violation(x),
        complementarity=complementarity,
    )
