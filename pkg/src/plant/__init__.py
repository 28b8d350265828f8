from .tower import (
    LinearizedTower,
    Measurement,
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
from .session import PlantSession, zero_signal
from .trajectory import TRAJECTORY_COLUMNS, Trajectory

__all__ = [
    'LinearizedTower', 'Measurement', 'PlantParams', 'PlantSession', 'TowerState', 'Trajectory',
    'TRAJECTORY_COLUMNS', 'dynamics', 'energy', 'linearize', 'measure',
    'modal_frequencies', 'simulate', 'step', 'tilted_state', 'zero_signal',
]
