"""
Tests for the tower control CLI.
"""

from unittest.mock import Mock, patch

import pytest

from src.cli import build_parser, main
from src.errors import EmptyDatasetError
from src.optimization.admm_qp import QpProblem
from src.optimization.qp_io import write_qp


@pytest.fixture(autouse=True)
def no_env_config(monkeypatch):
    """Keep a developer's TOWER_CONFIG out of the tests."""
    monkeypatch.delenv("TOWER_CONFIG", raising=False)


@pytest.fixture
def mock_pipeline():
    """Create mock pipeline."""
    with patch('src.cli.TowerPipeline') as mock:
        pipeline = Mock()
        mock.return_value = pipeline
        yield mock, pipeline


def test_parser_commands():
    """Test subcommands and their options."""
    args = build_parser().parse_args(["run", "--scenario", "initial_tilt", "--controller", "kmpc",
                                      "--seed", "3"])
    assert args.command == "run"
    assert args.scenario == "initial_tilt"
    assert args.controller == "kmpc"
    assert args.seed == 3


def test_no_command():
    """Test running without a command prints help and fails."""
    assert main([]) == 2


def test_missing_config_file(tmp_path):
    """Test a missing config file is a configuration error."""
    assert main(["collect", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_collect_uses_overrides(mock_pipeline, tmp_path):
    """Test collect builds the pipeline with the CLI overrides."""
    cls, pipeline = mock_pipeline
    pipeline.collect.return_value = []
    assert main(["collect", "--out", str(tmp_path), "--seed", "7"]) == 0

    config = cls.call_args[0][0]
    assert config.run.seed == 7
    assert str(config.output_dir) == str(tmp_path)
    pipeline.collect.assert_called_once()


def test_numerical_failure_exit_code(mock_pipeline, tmp_path):
    """Test numerical failures map to exit code 3."""
    _, pipeline = mock_pipeline
    pipeline.collect.side_effect = EmptyDatasetError("too few pairs")
    assert main(["collect", "--out", str(tmp_path)]) == 3


def test_run_prints_metrics(mock_pipeline, tmp_path, capsys):
    """Test run reports one line per scenario."""
    _, pipeline = mock_pipeline
    result = Mock()
    result.metrics = {"settling_time": 1.25, "peak_abs_phi": 0.3, "rms_error": 0.01,
                      "control_effort": 0.2}
    pipeline.run.return_value = {"initial_tilt": result}

    assert main(["run", "--scenario", "initial_tilt", "--out", str(tmp_path)]) == 0
    pipeline.run.assert_called_once_with(["initial_tilt"])
    assert "initial_tilt: settling_time=1.250s" in capsys.readouterr().out


def test_run_collect_scenario(mock_pipeline, tmp_path):
    """Test the collect scenario is routed to data collection."""
    _, pipeline = mock_pipeline
    pipeline.collect.return_value = []
    assert main(["run", "--scenario", "collect", "--out", str(tmp_path)]) == 0
    pipeline.collect.assert_called_once()
    pipeline.run.assert_not_called()


def test_solve_qp(tmp_path, capsys):
    """Test solving a QP file end to end."""
    problem = QpProblem(H=[[2.0]], f=[-4.0], G=[[1.0]], b_min=[-1.0], b_max=[1.0])
    path = write_qp(problem, tmp_path / "qp.txt")
    assert main(["solve-qp", str(path)]) == 0
    out = capsys.readouterr().out
    assert "status = solved" in out


def test_solve_qp_missing_file(tmp_path):
    """Test a missing QP file is a configuration error."""
    assert main(["solve-qp", str(tmp_path / "absent.txt")]) == 2
