"""
Tests for delay-embedding observables and the history buffer.
"""

import numpy as np
import pytest

from src.errors import InvalidInputError, NotReadyError
from src.identification.lifting import (
    HistoryBuffer,
    LiftingSpec,
    lift,
    lift_dataset,
    lift_trajectory,
    lifted_states,
    push,
)
from src.plant.tower import Measurement
from src.plant.trajectory import Trajectory


def _trajectory(length, offset=0.0, name="traj"):
    k = np.arange(length, dtype=float)
    return Trajectory(t=0.01 * k, phi=offset + k, phi_dot=offset + 100 + k,
                      u=offset + 1000 + k, d=np.zeros(length), name=name)


@pytest.mark.parametrize("delays,expected", [(0, 3), (2, 9), (3, 12)])
def test_lifted_dimension(delays, expected):
    """Test N = 3 (delays + 1)."""
    assert LiftingSpec(delays=delays).lifted_dim == expected


def test_negative_delays_rejected():
    """Test negative delay counts are invalid."""
    with pytest.raises(InvalidInputError):
        LiftingSpec(delays=-1)


def test_push_fills_and_evicts():
    """Test FIFO eviction once the buffer is full."""
    spec = LiftingSpec(delays=2)
    buffer = HistoryBuffer.empty(spec)
    buffer = push(buffer, Measurement(1.0, 0.0), 0.0)
    assert buffer.filled == 1
    for i in range(2, 5):
        buffer = buffer.push(Measurement(float(i), 0.0), 0.0)
    assert buffer.filled == 3
    assert [e[0] for e in buffer.entries] == [2.0, 3.0, 4.0]


def test_push_does_not_mutate():
    """Test push returns a new buffer and leaves the old one unchanged."""
    spec = LiftingSpec(delays=0)
    before = HistoryBuffer.empty(spec).push(Measurement(1.0, 2.0), 3.0)
    z_before = lift(before, spec)
    before.push(Measurement(9.0, 9.0), 9.0)
    np.testing.assert_array_equal(lift(before, spec), z_before)


def test_lift_constant_history():
    """Test a constant history repeats the same block."""
    spec = LiftingSpec(delays=1)
    buffer = HistoryBuffer.empty(spec)
    for _ in range(2):
        buffer = buffer.push(Measurement(1.0, 2.0), 3.0)
    np.testing.assert_array_equal(lift(buffer, spec), [1.0, 2.0, 3.0, 1.0, 2.0, 3.0])


def test_lift_oldest_first():
    """Test blocks are ordered oldest to newest."""
    spec = LiftingSpec(delays=2)
    buffer = HistoryBuffer.empty(spec)
    for i in range(3):
        buffer = buffer.push(Measurement(float(i), 10.0 + i), 20.0 + i)
    z = lift(buffer, spec)
    np.testing.assert_array_equal(z, [0, 10, 20, 1, 11, 21, 2, 12, 22])
    i_phi, i_phidot = spec.output_indices
    assert (z[i_phi], z[i_phidot]) == (2.0, 12.0)


def test_lift_requires_full_buffer():
    """Test lifting an under-filled buffer raises."""
    spec = LiftingSpec(delays=2)
    buffer = HistoryBuffer.empty(spec).push(Measurement(0.0, 0.0), 0.0)
    with pytest.raises(NotReadyError):
        lift(buffer, spec)


def test_lifted_states_match_buffer():
    """Test batch lifting agrees with pushing samples one at a time."""
    spec = LiftingSpec(delays=2)
    traj = _trajectory(6)
    Z = lifted_states(traj, spec)
    buffer = HistoryBuffer.empty(spec)
    u_prev = traj.u_before
    columns = []
    for k in range(len(traj)):
        buffer = buffer.push(Measurement(traj.phi[k], traj.phi_dot[k]), u_prev)
        u_prev = traj.u[k]
        if buffer.ready:
            columns.append(lift(buffer, spec))
    np.testing.assert_array_equal(Z, np.array(columns).T)


@pytest.mark.parametrize("length", [4, 5, 17])
def test_lift_dataset_pair_count(length):
    """Test L - delays - 1 pairs per trajectory."""
    spec = LiftingSpec(delays=2)
    assert len(lift_dataset(_trajectory(length), spec)) == length - 3


def test_short_trajectory_gives_no_pairs():
    """Test a too-short trajectory yields nothing."""
    spec = LiftingSpec(delays=3)
    assert lift_dataset(_trajectory(4), spec) == []


def test_pairs_shift_blocks():
    """Test z_{k+1} is z_k shifted by one block."""
    spec = LiftingSpec(delays=2)
    for z, z_next, u in lift_dataset(_trajectory(8), spec):
        np.testing.assert_array_equal(z[3:], z_next[:-3])
        assert z_next[-1] == u


def test_no_pairs_across_trajectories():
    """Test separate trajectories never produce mixed pairs."""
    spec = LiftingSpec(delays=1)
    first = lift_trajectory(_trajectory(10), spec)
    second = lift_trajectory(_trajectory(7, offset=5000.0), spec)
    assert first.pairs + second.pairs == 8 + 5
    assert np.all(second.Z_plus >= 5000.0)
    assert np.all(first.Z_plus < 5000.0)


def test_lift_dataset_accepts_measurement_sequences():
    """Test plain (measurement, input) sequences are accepted."""
    spec = LiftingSpec(delays=0)
    records = [(Measurement(float(k), 0.0), 0.5) for k in range(5)]
    pairs = lift_dataset(records, spec)
    assert len(pairs) == 4
    np.testing.assert_array_equal(pairs[0][0], [0.0, 0.0, 0.0])
    np.testing.assert_array_equal(pairs[0][1], [1.0, 0.0, 0.5])
