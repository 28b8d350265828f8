"""
Tests for configuration loading.
"""

import math
from pathlib import Path

import pytest

from src.errors import ConfigError
from src.experiments.config import RunConfig, load_config, parse_config

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "config" / "tower.cfg"


def test_defaults_without_file(monkeypatch):
    """Test built-in defaults when no file is configured."""
    monkeypatch.delenv("TOWER_CONFIG", raising=False)
    config = load_config(None)
    assert config.plant.n_links == 8
    assert config.lifting.delays == 2
    assert config.run.controller == "lqr"


def test_shipped_config_matches_defaults():
    """Test the shipped config file reproduces the built-in defaults."""
    config = load_config(DEFAULT_CONFIG)
    defaults = RunConfig()
    assert config.plant == defaults.plant
    assert config.lifting == defaults.lifting
    assert config.lqr == defaults.lqr
    assert config.kmpc == defaults.kmpc
    assert config.scenario.pulse_amplitude == defaults.scenario.pulse_amplitude
    assert config.scenario.initial_tilt == pytest.approx(math.radians(-20.0))
    assert config.scenario.pulse_times == (1.0, 4.0)
    assert config.edmd.ridge is None


def test_degree_keys_are_converted():
    """Test *_deg keys are stored in radians."""
    config = parse_config("[scenario]\ninitial_tilt_deg = 10\nreference_levels_deg = 0, 90\n"
                          "reference_times = 0, 1\n")
    assert config.scenario.initial_tilt == pytest.approx(math.radians(10))
    assert config.scenario.reference_levels == pytest.approx((0.0, math.pi / 2))


def test_unknown_key_rejected():
    """Test unknown keys fail fast."""
    with pytest.raises(ConfigError, match="stiffnes"):
        parse_config("[plant]\nstiffnes = 3\n")


def test_unknown_section_rejected():
    """Test unknown sections fail fast."""
    with pytest.raises(ConfigError):
        parse_config("[plants]\nn_links = 3\n")


def test_invalid_value_rejected():
    """Test non-numeric and out-of-range values are configuration errors."""
    with pytest.raises(ConfigError):
        parse_config("[plant]\nn_links = many\n")
    with pytest.raises(ConfigError):
        parse_config("[plant]\nsensor_link = 12\n")
    with pytest.raises(ConfigError):
        parse_config("[run]\ncontroller = pid\n")


def test_inline_comments_and_booleans():
    """Test inline comments and boolean spellings."""
    config = parse_config("[scenario]\ncompare_uncontrolled = no  # only the controlled run\n")
    assert config.scenario.compare_uncontrolled is False


def test_env_variable_selects_file(tmp_path, monkeypatch):
    """Test TOWER_CONFIG points at the file when no path is given."""
    path = tmp_path / "custom.cfg"
    path.write_text("[lifting]\ndelays = 3\n")
    monkeypatch.setenv("TOWER_CONFIG", str(path))
    assert load_config().lifting.delays == 3


def test_missing_file(tmp_path):
    """Test a missing config file is an error."""
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_overrides():
    """Test CLI overrides replace run settings and keep validation."""
    config = RunConfig().with_overrides(seed=4, output_dir="elsewhere", scenario="pulse_disturbance",
                                        controller="kmpc")
    assert config.run.seed == 4
    assert config.output_dir == Path("elsewhere")
    assert config.scenario.name == "pulse_disturbance"
    assert config.predictor_path == Path("elsewhere") / "predictor.txt"
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(scenario="unknown")
