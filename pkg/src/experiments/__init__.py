from .config import RunConfig, load_config, parse_config
from .excitation import EXCITATIONS, excitation
from .metrics import compute_metrics, settling_time
from .scenarios import (
    ScenarioPlan,
    collect_training_data,
    plan_scenario,
    run_batch,
    run_scenario,
)
from .storage import read_metrics, read_series, read_trajectories, write_metrics, write_result

__all__ = [
    'EXCITATIONS', 'RunConfig', 'ScenarioPlan', 'collect_training_data', 'compute_metrics',
    'excitation', 'load_config', 'parse_config', 'plan_scenario', 'read_metrics',
    'read_series', 'read_trajectories', 'run_batch', 'run_scenario', 'settling_time',
    'write_metrics', 'write_result',
]
