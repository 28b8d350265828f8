"""
Plain-text QP format used by the `solve-qp` debug command.

    # comment lines are ignored
    n c
    H
    <n rows of n numbers>
    f
    <n numbers>
    G
    <c rows of n numbers>
    b_min
    <c numbers, inf/-inf allowed>
    b_max
    <c numbers>
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from src.errors import ConfigError
from src.optimization.admm_qp import QpProblem, QpSolution

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _parse_row(line: str, expected: int, where: str) -> List[float]:
    try:
        values = [float(v) for v in line.split()]
    except ValueError as e:
        raise ConfigError(f"Non-numeric entry in {where}: '{line}'") from e
    if len(values) != expected:
        raise ConfigError(f"{where} expects {expected} entries, found {len(values)}")
    return values


def parse_qp(text: str) -> QpProblem:
    """Parse the text format into a QpProblem.

    Raises:
        ConfigError: malformed content
    """
    lines = [line.split("#", 1)[0].strip() for line in text.splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise ConfigError("Empty QP description")
    try:
        n, c = (int(v) for v in lines[0].split())
    except ValueError as e:
        raise ConfigError(f"Dimension line must be 'n c', found '{lines[0]}'") from e
    if n < 1 or c < 0:
        raise ConfigError(f"Invalid QP dimensions n={n}, c={c}")

    # bound rows are blank when c == 0 and were dropped above
    bound_rows = 1 if c > 0 else 0
    layout = [("H", n), ("f", 1), ("G", c), ("b_min", bound_rows), ("b_max", bound_rows)]
    widths = {"H": n, "f": n, "G": n, "b_min": c, "b_max": c}
    blocks: Dict[str, np.ndarray] = {}
    i = 1
    for name, rows in layout:
        if i >= len(lines) or lines[i] != name:
            found = lines[i] if i < len(lines) else "end of input"
            raise ConfigError(f"Expected block '{name}', found '{found}'")
        body = lines[i + 1:i + 1 + rows]
        if len(body) != rows:
            raise ConfigError(f"Block {name} expects {rows} rows, found {len(body)}")
        blocks[name] = np.array([_parse_row(row, widths[name], f"block {name}") for row in body],
                                dtype=float).reshape(rows, widths[name])
        i += 1 + rows
    if i != len(lines):
        raise ConfigError(f"Unexpected trailing content: '{lines[i]}'")

    return QpProblem(H=blocks["H"], f=blocks["f"].ravel(), G=blocks["G"],
                     b_min=blocks["b_min"].ravel(), b_max=blocks["b_max"].ravel())


def read_qp(path: Union[str, Path]) -> QpProblem:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"QP file not found: {path}")
    problem = parse_qp(path.read_text())
    logger.debug(f"Read QP n={problem.n} c={problem.c} from {path}")
    return problem


def format_qp(problem: QpProblem) -> str:
    def row(values) -> str:
        return " ".join(FLOAT_FORMAT % v for v in values)

    parts = [f"{problem.n} {problem.c}", "H"]
    parts += [row(r) for r in problem.H]
    parts += ["f", row(problem.f), "G"]
    parts += [row(r) for r in problem.G]
    parts += ["b_min", row(problem.b_min), "b_max", row(problem.b_max)]
    return "\n".join(parts) + "\n"


def write_qp(problem: QpProblem, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_qp(problem))
    return path


def format_solution(solution: QpSolution) -> str:
    """Key-value summary printed by the debug command."""
    lines = [
        f"status = {solution.status.value}",
        f"iterations = {solution.iterations}",
        f"objective = {FLOAT_FORMAT % solution.objective}",
        f"primal_residual = {solution.primal_residual:.3e}",
        f"dual_residual = {solution.dual_residual:.3e}",
        f"polished = {str(solution.polished).lower()}",
        "x = " + " ".join(FLOAT_FORMAT % v for v in solution.x),
        "y = " + " ".join(FLOAT_FORMAT % v for v in solution.y),
    ]
    return "\n".join(lines) + "\n"
