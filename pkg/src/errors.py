"""
Exception hierarchy for the tower control toolkit.

The CLI maps ConfigError to exit code 2 and NumericalError to exit code 3.
"""

from typing import Optional


class TowerControlError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TowerControlError):
    """Invalid, unknown or inconsistent configuration."""


class NumericalError(TowerControlError):
    """Base class for numerical failures."""


class InvalidInputError(NumericalError):
    """Non-finite or out-of-range numerical input."""


class DimensionMismatchError(NumericalError):
    """Matrix or vector dimensions do not agree."""


class NumericalBlowupError(NumericalError):
    """Integration produced non-finite values."""

    def __init__(self, message: str, time: float, sample: Optional[int] = None):
        super().__init__(message)
        self.time = time
        self.sample = sample


class NotReadyError(NumericalError):
    """History buffer has not been filled yet."""


class EmptyDatasetError(NumericalError):
    """No snapshot pairs could be assembled."""


class DegenerateDataError(NumericalError):
    """Data has (near) zero variance."""


class ConvergenceError(NumericalError):
    """Iteration did not converge within its budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class StabilizabilityError(NumericalError):
    """Closed loop is not stable."""

    def __init__(self, message: str, spectral_radius: float):
        super().__init__(message)
        self.spectral_radius = spectral_radius


class CondensationError(NumericalError):
    """Condensed MPC Hessian is not positive definite."""


class InfeasibleProblemError(NumericalError):
    """QP was certified primal infeasible."""
