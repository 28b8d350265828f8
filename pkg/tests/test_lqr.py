"""
Tests for the Riccati solver, the gain and the lifted LQR controller.
"""

import math

import numpy as np
import pytest
from scipy import linalg

from src.control.lqr import (
    LqrController,
    closed_loop_radius,
    gain,
    lqr_control,
    output_penalty,
    riccati_iteration,
    riccati_residual,
    saturate,
    solve_dare,
)
from src.errors import ConvergenceError, InvalidInputError, StabilizabilityError
from src.identification.lifting import HistoryBuffer, LiftingSpec
from src.plant.tower import Measurement

GOLDEN = (1 + math.sqrt(5)) / 2


def test_golden_ratio_case():
    """Test the scalar closed form p = (1 + sqrt 5) / 2."""
    P = solve_dare([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert P[0, 0] == pytest.approx(GOLDEN, abs=1e-9)
    K = gain([[1.0]], [[1.0]], P, [[1.0]])
    assert K[0, 0] == pytest.approx(GOLDEN - 1, abs=1e-9)


def test_zero_state_cost():
    """Test a stable plant with Q = 0 needs no feedback."""
    P = solve_dare([[0.5]], [[1.0]], [[0.0]], [[1.0]])
    assert P[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert gain([[0.5]], [[1.0]], P, [[1.0]])[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_zero_input_matrix_gain():
    """Test B = 0 gives K = 0."""
    K = gain(np.eye(2) * 0.5, np.zeros((2, 1)), np.eye(2), [[1.0]])
    assert np.all(K == 0.0)


def test_random_system_against_scipy():
    """Test a random stabilizable system against an independent DARE solver."""
    rng = np.random.default_rng(5)
    A = rng.standard_normal((6, 6)) * 0.4
    B = rng.standard_normal((6, 2))
    Q = np.eye(6)
    R = np.eye(2)
    P = solve_dare(A, B, Q, R)
    np.testing.assert_allclose(P, linalg.solve_discrete_are(A, B, Q, R), rtol=1e-8, atol=1e-8)
    assert riccati_residual(A, B, Q, R, P) < 1e-9 * (1 + np.linalg.norm(P))
    np.testing.assert_allclose(P, P.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(P)) > -1e-9


def test_unstabilizable_system():
    """Test an unstable mode without actuation is reported."""
    A = np.diag([1.2, 0.5])
    B = np.array([[0.0], [1.0]])
    with pytest.raises((StabilizabilityError, ConvergenceError)):
        solve_dare(A, B, np.eye(2), [[1.0]], max_iter=2000)


def test_non_convergence_reports_residual():
    """Test the iteration limit raises with the last step size."""
    with pytest.raises(ConvergenceError) as excinfo:
        solve_dare([[1.0]], [[1.0]], [[1.0]], [[1.0]], max_iter=2)
    assert excinfo.value.residual > 0


def test_r_must_be_positive_definite():
    """Test R = 0 is rejected."""
    with pytest.raises(InvalidInputError):
        solve_dare([[1.0]], [[1.0]], [[1.0]], [[0.0]])


def test_gain_minimizes_one_step_cost():
    """Test perturbing u = -Kz never lowers the one-step-plus-cost-to-go value."""
    rng = np.random.default_rng(9)
    A = rng.standard_normal((4, 4)) * 0.5
    B = rng.standard_normal((4, 1))
    Q, R = np.eye(4), np.array([[0.3]])
    P = solve_dare(A, B, Q, R)
    K = gain(A, B, P, R)

    def value(z, u):
        z_next = A @ z + B @ u
        return z @ Q @ z + u @ R @ u + z_next @ P @ z_next

    for _ in range(20):
        z = rng.standard_normal(4)
        u_opt = -K @ z
        du = 0.1 * rng.standard_normal(1)
        assert value(z, u_opt) <= value(z, u_opt + du) + 1e-12


def test_output_penalty_only_newest_block():
    """Test Q weights only phi and phi_dot of the newest block."""
    Q = output_penalty(LiftingSpec(delays=2), 10.0, 1.0)
    assert Q.shape == (9, 9)
    assert Q[6, 6] == 10.0 and Q[7, 7] == 1.0
    Q[6, 6] = Q[7, 7] = 0.0
    assert np.all(Q == 0.0)


def test_lqr_control_layout():
    """Test the gain applies to the newest phi in the oldest-first layout."""
    spec = LiftingSpec(delays=2)
    K = np.zeros((1, 9))
    K[0, 6] = 1.0
    buffer = HistoryBuffer.empty(spec)
    for phi in (0.0, 0.0, 0.2):
        buffer = buffer.push(Measurement(phi, 0.0), 0.0)
    assert lqr_control(K, buffer, spec, limit=0.5) == pytest.approx(-0.2)


def test_lqr_control_zero_history():
    """Test zero history gives zero torque."""
    spec = LiftingSpec(delays=1)
    buffer = HistoryBuffer.empty(spec)
    for _ in range(2):
        buffer = buffer.push(Measurement(0.0, 0.0), 0.0)
    assert lqr_control(np.ones((1, 6)), buffer, spec, limit=0.5) == 0.0


def test_lqr_control_saturates():
    """Test an unclamped 0.9 becomes the 0.5 limit."""
    spec = LiftingSpec(delays=0)
    buffer = HistoryBuffer.empty(spec).push(Measurement(-0.9, 0.0), 0.0)
    K = np.array([[1.0, 0.0, 0.0]])
    assert lqr_control(K, buffer, spec, limit=0.5) == 0.5
    assert saturate(saturate(0.9, 0.5), 0.5) == saturate(0.9, 0.5)


def test_controller_warmup():
    """Test the controller outputs zero until its history is full."""
    spec = LiftingSpec(delays=2)
    controller = LqrController(np.ones((1, 9)), spec, limit=0.5)
    statuses = [controller.act(Measurement(0.1, 0.0), 0.0, 0.01 * k).status for k in range(4)]
    assert statuses == ["warmup", "warmup", "ok", "ok"]
    controller.reset()
    assert controller.act(Measurement(0.1, 0.0), 0.0, 0.0).u == 0.0


def test_tower_lqr_is_stabilizing(tower_predictor, tower_lqr):
    """Test the tower design contracts faster than the open-loop predictor."""
    open_loop = float(np.max(np.abs(np.linalg.eigvals(tower_predictor.A))))
    radius = closed_loop_radius(tower_predictor.A, tower_predictor.B, tower_lqr.K)
    assert radius < 1.0
    assert radius < open_loop
    residual = riccati_residual(tower_predictor.A, tower_predictor.B, tower_lqr.Q, tower_lqr.R, tower_lqr.P)
    assert residual <= 1e-9 * (1 + np.linalg.norm(tower_lqr.P)) * 10


def test_iteration_count_is_reported():
    """Test the fixed-point iteration count matches the returned solution."""
    P, iterations = riccati_iteration([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert iterations > 1
    np.testing.assert_array_equal(P, solve_dare([[1.0]], [[1.0]], [[1.0]], [[1.0]]))
    with pytest.raises(ConvergenceError):
        riccati_iteration([[1.0]], [[1.0]], [[1.0]], [[1.0]], max_iter=iterations - 1)


def test_tower_design_records_iterations(tower_lqr):
    """Test the tower design carries a non-zero iteration count."""
    assert tower_lqr.iterations > 0
    assert tower_lqr.R[0, 0] == pytest.approx(100.0)
