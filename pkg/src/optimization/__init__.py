from .admm_qp import (
    AdmmSolver,
    KktReport,
    QpProblem,
    QpSettings,
    QpSolution,
    QpStatus,
    kkt_check,
    solve,
)
from .qp_io import format_qp, format_solution, parse_qp, read_qp, write_qp

__all__ = [
    'AdmmSolver', 'KktReport', 'QpProblem', 'QpSettings', 'QpSolution', 'QpStatus',
    'format_qp', 'format_solution', 'kkt_check', 'parse_qp', 'read_qp', 'solve',
    'write_qp',
]
