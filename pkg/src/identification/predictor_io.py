"""Text persistence for lifted predictors and optional LQR gains."""

import logging
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.errors import ConfigError, DimensionMismatchError, InvalidInputError
from src.identification.edmd import LiftedPredictor
from src.identification.lifting import LiftingSpec

logger = logging.getLogger(__name__)

MAGIC = "KOOPMAN-PREDICTOR v1"
FLOAT_FORMAT = "%.17g"
BLOCK_ORDER = ("A", "B", "C", "K", "P")


def _format_block(name: str, matrix: np.ndarray) -> str:
    rows = [" ".join(FLOAT_FORMAT % v for v in row) for row in np.atleast_2d(matrix)]
    return "\n".join([name] + rows)


def save_predictor(pred: LiftedPredictor,
                   path: Union[str, Path],
                   K: Optional[np.ndarray] = None,
                   P: Optional[np.ndarray] = None) -> Path:
    """Write the predictor (and optionally the LQR gain K and Riccati solution P).

    The output is byte-deterministic for equal inputs.
    """
    if pred.spec is None:
        raise InvalidInputError("Cannot save a predictor without a lifting specification")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    parts = [MAGIC, f"{pred.N} {pred.q} {pred.m} {pred.spec.delays} {FLOAT_FORMAT % pred.dt}"]
    parts += [_format_block("A", pred.A), _format_block("B", pred.B), _format_block("C", pred.C)]
    if K is not None:
        K = np.atleast_2d(np.asarray(K, dtype=float))
        if K.shape != (pred.m, pred.N):
            raise DimensionMismatchError(f"K has shape {K.shape}, expected {(pred.m, pred.N)}")
        parts.append(_format_block("K", K))
    if P is not None:
        P = np.asarray(P, dtype=float)
        if P.shape != (pred.N, pred.N):
            raise DimensionMismatchError(f"P has shape {P.shape}, expected {(pred.N, pred.N)}")
        parts.append(_format_block("P", P))

    path.write_text("\n".join(parts) + "\n")
    logger.info(f"Saved predictor N={pred.N} to {path}")
    return path


def load_predictor(path: Union[str, Path]) -> Tuple[LiftedPredictor, Dict[str, np.ndarray]]:
    """Read a predictor file.

    Returns:
        (predictor, extras) where extras holds the optional `K` and `P` blocks

    Raises:
        ConfigError: missing file or malformed content
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Predictor file not found: {path}")

    lines = [line.strip() for line in path.read_text().splitlines() if line.strip()]
    if not lines or lines[0] != MAGIC:
        raise ConfigError(f"{path} is not a predictor file (expected '{MAGIC}' header)")
    try:
        N, q, m, delays = (int(v) for v in lines[1].split()[:4])
        dt = float(lines[1].split()[4])
    except (IndexError, ValueError) as e:
        raise ConfigError(f"Malformed dimension line in {path}: {lines[1:2]}") from e

    expected_rows = {"A": N, "B": N, "C": q, "K": m, "P": N}
    expected_cols = {"A": N, "B": m, "C": N, "K": N, "P": N}
    blocks: Dict[str, np.ndarray] = {}
    i = 2
    while i < len(lines):
        name = lines[i]
        if name not in expected_rows or name in blocks:
            raise ConfigError(f"Unexpected block header '{name}' in {path}")
        rows = lines[i + 1:i + 1 + expected_rows[name]]
        try:
            matrix = np.array([[float(v) for v in row.split()] for row in rows], dtype=float)
        except ValueError as e:
            raise ConfigError(f"Non-numeric entry in block {name} of {path}") from e
        if matrix.shape != (expected_rows[name], expected_cols[name]):
            raise ConfigError(
                f"Block {name} in {path} has shape {matrix.shape}, "
                f"expected {(expected_rows[name], expected_cols[name])}"
            )
        blocks[name] = matrix
        i += 1 + expected_rows[name]

    missing = [name for name in ("A", "B", "C") if name not in blocks]
    if missing:
        raise ConfigError(f"Predictor file {path} is missing blocks {missing}")

    pred = LiftedPredictor(A=blocks["A"], B=blocks["B"], C=blocks["C"],
                           spec=LiftingSpec(delays=delays), dt=dt)
    extras = {name: blocks[name] for name in ("K", "P") if name in blocks}
    logger.debug(f"Loaded predictor N={N} (delays={delays}) from {path}")
    return pred, extras
