"""Stateful plant wrapper used by closed-loop runs."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from src.errors import InvalidInputError, NumericalBlowupError
from src.plant.tower import Measurement, PlantParams, TowerState, measure, step

logger = logging.getLogger(__name__)

Signal = Callable[[float], float]


def zero_signal(t: float) -> float:
    return 0.0


@dataclass
class PlantSession:
    """One simulated tower advancing one sample per `apply` call.

    `disturbance` is a torque on the top link, `input_disturbance` adds to the
    commanded base torque after saturation. Measurement noise is zero-mean
    uniform in [-noise_amplitude, noise_amplitude] on both outputs.
    """
    params: PlantParams
    state: TowerState
    disturbance: Signal = zero_signal
    input_disturbance: Signal = zero_signal
    noise_amplitude: float = 0.0
    seed: Optional[int] = None
    samples: int = field(default=0, init=False)

    def __post_init__(self):
        if self.noise_amplitude < 0:
            raise InvalidInputError("noise_amplitude must be non-negative")
        self._rng = np.random.default_rng(self.seed)

    @property
    def t(self) -> float:
        return self.state.t

    def measure(self) -> Measurement:
        m = measure(self.state, self.params)
        if self.noise_amplitude == 0.0:
            return m
        noise = self._rng.uniform(-self.noise_amplitude, self.noise_amplitude, size=2)
        return Measurement(phi=m.phi + float(noise[0]), phi_dot=m.phi_dot + float(noise[1]))

    def apply(self, u: float) -> float:
        """Hold torque u (clamped to the actuator limit) for one sample.

        Returns:
            Top-link disturbance torque that acted over the sample
        """
        limit = self.params.torque_limit
        t = self.state.t
        d = float(self.disturbance(t))
        u_total = float(np.clip(u, -limit, limit)) + float(self.input_disturbance(t))
        try:
            self.state = step(self.state, u_total, d, self.params)
        except NumericalBlowupError as e:
            raise NumericalBlowupError(f"{e} (sample {self.samples})", time=e.time, sample=self.samples) from e
        self.samples += 1
        return d
