"""
Tests for the predictor text file.
"""

import numpy as np
import pytest

from src.errors import ConfigError, DimensionMismatchError
from src.identification.edmd import LiftedPredictor
from src.identification.lifting import LiftingSpec
from src.identification.predictor_io import MAGIC, load_predictor, save_predictor


@pytest.fixture
def predictor():
    rng = np.random.default_rng(11)
    spec = LiftingSpec(delays=1)
    return LiftedPredictor(A=rng.standard_normal((6, 6)), B=rng.standard_normal((6, 1)),
                           C=rng.standard_normal((2, 6)), spec=spec, dt=0.01)


def test_save_load_exact(predictor, tmp_path):
    """Test matrices survive the text format bit for bit."""
    path = save_predictor(predictor, tmp_path / "predictor.txt")
    loaded, extras = load_predictor(path)
    assert np.array_equal(loaded.A, predictor.A)
    assert np.array_equal(loaded.B, predictor.B)
    assert np.array_equal(loaded.C, predictor.C)
    assert loaded.spec == predictor.spec
    assert loaded.dt == 0.01
    assert extras == {}


def test_header_lines(predictor, tmp_path):
    """Test the magic and dimension lines."""
    path = save_predictor(predictor, tmp_path / "predictor.txt")
    lines = path.read_text().splitlines()
    assert lines[0] == MAGIC
    assert lines[1] == "6 2 1 1 0.01"
    assert lines[2] == "A"


def test_gain_blocks(predictor, tmp_path):
    """Test optional K and P blocks are stored and returned."""
    K = np.arange(6.0).reshape(1, 6)
    P = np.eye(6)
    path = save_predictor(predictor, tmp_path / "p.txt", K=K, P=P)
    _, extras = load_predictor(path)
    assert np.array_equal(extras["K"], K)
    assert np.array_equal(extras["P"], P)


def test_wrong_gain_shape(predictor, tmp_path):
    """Test a K of the wrong shape is rejected."""
    with pytest.raises(DimensionMismatchError):
        save_predictor(predictor, tmp_path / "p.txt", K=np.ones((1, 5)))


def test_deterministic_bytes(predictor, tmp_path):
    """Test saving twice writes identical files."""
    a = save_predictor(predictor, tmp_path / "a.txt").read_bytes()
    b = save_predictor(predictor, tmp_path / "b.txt").read_bytes()
    assert a == b


def test_bad_magic(tmp_path):
    """Test files without the magic line are rejected."""
    path = tmp_path / "bad.txt"
    path.write_text("something else\n")
    with pytest.raises(ConfigError):
        load_predictor(path)


def test_truncated_block(predictor, tmp_path):
    """Test a truncated matrix block is reported."""
    path = save_predictor(predictor, tmp_path / "p.txt")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ConfigError):
        load_predictor(path)


def test_missing_file(tmp_path):
    """Test a missing file is a configuration error."""
    with pytest.raises(ConfigError):
        load_predictor(tmp_path / "absent.txt")
