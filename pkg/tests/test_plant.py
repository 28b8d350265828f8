"""
Tests for the tower simulator and the plant session.
"""

import math

import numpy as np
import pytest

from src.errors import InvalidInputError, NumericalBlowupError
from src.experiments.metrics import settling_time
from src.plant.session import PlantSession
from src.plant.tower import (
    PlantParams,
    TowerState,
    dynamics,
    energy,
    linearize,
    measure,
    modal_frequencies,
    simulate,
    step,
    tilted_state,
)
from src.plant.trajectory import Trajectory


@pytest.fixture
def params():
    return PlantParams()


@pytest.fixture
def rest(params):
    return TowerState.at_rest(params)


def test_params_validation():
    """Test invalid plant parameters are rejected."""
    with pytest.raises(InvalidInputError):
        PlantParams(n_links=1)
    with pytest.raises(InvalidInputError):
        PlantParams(sensor_link=9)
    with pytest.raises(InvalidInputError):
        PlantParams(damping=0.0)
    with pytest.raises(InvalidInputError):
        PlantParams(stiffness=float("nan"))


def test_dynamics_equilibrium(params, rest):
    """Test the upright rest state is an equilibrium."""
    theta_dot, omega_dot = dynamics(rest, 0.0, 0.0, params)
    assert np.all(theta_dot == 0.0)
    assert np.all(omega_dot == 0.0)


def test_dynamics_base_torque(params, rest):
    """Test base torque accelerates only the first link from rest."""
    _, omega_dot = dynamics(rest, 0.1, 0.0, params)
    assert omega_dot[0] > 0
    assert np.all(omega_dot[1:] == 0.0)


def test_dynamics_matches_linearization(params):
    """Test small-angle accelerations agree with the finite-difference Jacobian."""
    rng = np.random.default_rng(3)
    theta = 1e-5 * rng.standard_normal(params.n_links)
    state = TowerState(theta, np.zeros(params.n_links))
    _, omega_dot = dynamics(state, 0.0, 0.0, params)

    jac = linearize(params).A
    n = params.n_links
    expected = jac[n:, :n] @ theta
    np.testing.assert_allclose(omega_dot, expected, rtol=1e-5, atol=1e-12)


def test_dynamics_rejects_non_finite(params):
    """Test non-finite states are rejected."""
    state = TowerState(np.full(params.n_links, np.nan), np.zeros(params.n_links))
    with pytest.raises(InvalidInputError):
        dynamics(state, 0.0, 0.0, params)


def test_step_fixed_point(params, rest):
    """Test stepping the rest state only advances time."""
    nxt = step(rest, 0.0, 0.0, params)
    assert np.all(nxt.theta == 0.0)
    assert np.all(nxt.omega == 0.0)
    assert nxt.t == pytest.approx(params.dt)


def test_step_is_deterministic(params, rest):
    """Test identical inputs give bit-identical states."""
    a = step(rest, params.torque_limit, 0.0, params)
    b = step(rest, params.torque_limit, 0.0, params)
    assert np.array_equal(a.theta, b.theta)
    assert np.array_equal(a.omega, b.omega)


def test_step_blowup_carries_time():
    """Test a diverging integration raises with the offending time."""
    params = PlantParams(stiffness=1e12, dt=1.0, substeps=1)
    state = tilted_state(params, 0.1)
    with pytest.raises(NumericalBlowupError) as excinfo:
        for _ in range(200):
            state = step(state, 0.0, 0.0, params)
    assert excinfo.value.time > 0


def test_energy_non_increasing(params):
    """Test unforced damped motion never gains energy."""
    state = tilted_state(params, math.radians(-20.0))
    e0 = energy(state, params)
    previous = e0
    for _ in range(300):
        state = step(state, 0.0, 0.0, params)
        current = energy(state, params)
        assert current <= previous + 1e-9 * abs(e0)
        previous = current


def test_measure_projection():
    """Test the sensor link (1-based) is read out."""
    params = PlantParams(sensor_link=2)
    theta = 0.1 * np.arange(1, params.n_links + 1)
    omega = -theta
    m = measure(TowerState(theta, omega), params)
    assert m.phi == pytest.approx(0.2)
    assert m.phi_dot == pytest.approx(-0.2)


def test_simulate_zero_input_stays_at_rest(params, rest):
    """Test zero signals from rest give a constant rest trajectory."""
    records = simulate(rest, np.zeros(50), np.zeros(50), params)
    assert len(records) == 50
    assert records[0][0] is rest
    assert all(m.phi == 0.0 and m.phi_dot == 0.0 for _, m in records)


def test_simulate_length_mismatch(params, rest):
    """Test mismatched signal lengths are rejected."""
    with pytest.raises(InvalidInputError):
        simulate(rest, np.zeros(5), np.zeros(4), params)


def test_simulate_sine_response_frequency(params, rest):
    """Test forced response oscillates at the forcing frequency."""
    n = 2000
    t = params.dt * np.arange(n)
    freq = 2.0
    u = 0.3 * np.sin(2 * np.pi * freq * t)
    records = simulate(rest, u, np.zeros(n), params)
    phi = np.array([m.phi for _, m in records])[n // 2:]

    spectrum = np.abs(np.fft.rfft(phi - phi.mean()))
    freqs = np.fft.rfftfreq(len(phi), params.dt)
    assert freqs[np.argmax(spectrum)] == pytest.approx(freq, abs=freqs[1])


def test_pulse_response_settles(params, rest):
    """Test a top-link pulse decays back into the 2% band."""
    n = 1500
    d = np.zeros(n)
    d[10:60] = 0.4
    records = simulate(rest, np.zeros(n), d, params)
    t = np.array([s.t for s, _ in records])
    phi = np.array([m.phi for _, m in records])
    settle = settling_time(t[60:], phi[60:])
    assert math.isfinite(settle)


def test_unforced_tilt_converges(params):
    """Test the tower returns upright from a 20 degree tilt."""
    n = 2000
    records = simulate(tilted_state(params, math.radians(20.0)), np.zeros(n), np.zeros(n), params)
    assert abs(records[-1][1].phi) < 1e-3


def test_modal_frequency_matches_free_oscillation(params):
    """Test the slowest linear mode period is reproduced by simulation."""
    freqs, _ = modal_frequencies(params)
    slowest = freqs[0]
    n = 3000
    records = simulate(tilted_state(params, 1e-3), np.zeros(n), np.zeros(n), params)
    phi = np.array([m.phi for _, m in records])
    t = params.dt * np.arange(n)

    # upward zero crossings after the first fast transients
    crossings = []
    for k in range(200, n - 1):
        if phi[k] < 0.0 <= phi[k + 1]:
            crossings.append(t[k] - phi[k] * params.dt / (phi[k + 1] - phi[k]))
    period = float(np.mean(np.diff(crossings)))
    assert 2 * np.pi / period == pytest.approx(slowest, rel=0.02)


def test_trajectory_from_rollout_round_trip(params, rest):
    """Test trajectories survive conversion to and from a frame."""
    u = 0.1 * np.ones(20)
    records = simulate(rest, u, np.zeros(20), params)
    traj = Trajectory.from_rollout(records, u, np.zeros(20), name="step")
    again = Trajectory.from_frame(traj.to_frame(), name="step")
    np.testing.assert_array_equal(again.phi, traj.phi)
    assert len(again) == 20


def test_session_applies_saturation_and_disturbance(params):
    """Test the session clips torque and adds the input offset."""
    session = PlantSession(params=params, state=TowerState.at_rest(params),
                           input_disturbance=lambda t: 0.05, disturbance=lambda t: 0.2)
    d = session.apply(2.0)
    assert d == pytest.approx(0.2)
    expected = step(TowerState.at_rest(params), params.torque_limit + 0.05, 0.2, params)
    np.testing.assert_allclose(session.state.theta, expected.theta)
    assert session.t == pytest.approx(params.dt)


def test_session_noise_is_seeded(params):
    """Test measurement noise is reproducible and bounded."""
    make = lambda: PlantSession(params=params, state=TowerState.at_rest(params),
                                noise_amplitude=0.01, seed=7)
    a, b = make(), make()
    readings_a = [a.measure().phi for _ in range(20)]
    readings_b = [b.measure().phi for _ in range(20)]
    assert readings_a == readings_b
    assert max(abs(v) for v in readings_a) <= 0.01
