from .closed_loop import (
    RESULT_COLUMNS,
    ControlAction,
    Controller,
    ExperimentResult,
    OpenLoop,
    Switched,
    run_closed_loop,
)
from .kmpc import (
    CondensedLayout,
    CondensedQP,
    KmpcConfig,
    KmpcController,
    MpcDiagnostics,
    SolverState,
    TrackingReference,
    condense,
    mpc_step,
    reference_window,
    track,
)
from .lqr import (
    LqrController,
    LqrDesign,
    closed_loop_radius,
    design_lqr,
    gain,
    lqr_control,
    output_penalty,
    riccati_iteration,
    riccati_residual,
    solve_dare,
)

__all__ = [
    'RESULT_COLUMNS', 'CondensedLayout', 'CondensedQP', 'ControlAction', 'Controller',
    'ExperimentResult', 'KmpcConfig', 'KmpcController', 'LqrController', 'LqrDesign',
    'MpcDiagnostics', 'OpenLoop', 'SolverState', 'Switched', 'TrackingReference',
    'closed_loop_radius', 'condense', 'design_lqr', 'gain', 'lqr_control', 'mpc_step',
    'output_penalty', 'reference_window', 'riccati_iteration', 'riccati_residual', 'run_closed_loop',
    'solve_dare', 'track',
]
