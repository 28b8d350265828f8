"""
Open-loop torque signals for training-data collection.
"""

import logging
from typing import Callable, Dict

import numpy as np
from scipy import signal

from src.errors import InvalidInputError
from src.experiments.config import CollectSettings

logger = logging.getLogger(__name__)

EXCITATIONS = ("chirp", "sine_low", "sine_high", "random_steps", "filtered_noise", "pulse_train")


def _chirp(t: np.ndarray, cfg: CollectSettings, rng: np.random.Generator) -> np.ndarray:
    return signal.chirp(t, f0=cfg.chirp_f0, t1=t[-1], f1=cfg.chirp_f1, method="logarithmic")


def _sine_low(t: np.ndarray, cfg: CollectSettings, rng: np.random.Generator) -> np.ndarray:
    return np.sin(2 * np.pi * cfg.sine_low_frequency * t)


def _sine_high(t: np.ndarray, cfg: CollectSettings, rng: np.random.Generator) -> np.ndarray:
    return np.sin(2 * np.pi * cfg.sine_high_frequency * t)


def _random_steps(t: np.ndarray, cfg: CollectSettings, rng: np.random.Generator) -> np.ndarray:
    dt = t[1] - t[0] if len(t) > 1 else 1.0
    hold = max(1, int(round(cfg.step_hold / dt)))
    levels = rng.uniform(-1.0, 1.0, size=len(t) // hold + 1)
    return np.repeat(levels, hold)[:len(t)]


def _filtered_noise(t: np.ndarray, cfg: CollectSettings, rng: np.random.Generator) -> np.ndarray:
    dt = t[1] - t[0] if len(t) > 1 else 1.0
    nyquist = 0.5 / dt
    b, a = signal.butter(4, min(cfg.noise_cutoff / nyquist, 0.99))
    filtered = signal.lfilter(b, a, rng.standard_normal(len(t)))
    peak = np.max(np.abs(filtered))
    return filtered / peak if peak > 0 else filtered


def _pulse_train(t: np.ndarray, cfg: CollectSettings, rng: np.random.Generator) -> np.ndarray:
    phase = np.mod(t, cfg.pulse_period)
    sign = np.where(np.mod(np.floor(t / cfg.pulse_period), 2) == 0, 1.0, -1.0)
    return np.where(phase < cfg.pulse_width, sign, 0.0)


SHAPES: Dict[str, Callable[[np.ndarray, CollectSettings, np.random.Generator], np.ndarray]] = {
    "chirp": _chirp,
    "sine_low": _sine_low,
    "sine_high": _sine_high,
    "random_steps": _random_steps,
    "filtered_noise": _filtered_noise,
    "pulse_train": _pulse_train,
}


def excitation(name: str,
               cfg: CollectSettings,
               dt: float,
               limit: float,
               rng: np.random.Generator) -> np.ndarray:
    """Torque samples of one excitation, scaled to cfg.amplitude and clipped to +/-limit.

    Args:
        name: One of EXCITATIONS
        cfg: Collection settings (duration, amplitude, shape parameters)
        dt: Sample period
        limit: Actuator torque limit
        rng: Random generator for the stochastic shapes

    Returns:
        Array of round(duration / dt) torque samples
    """
    if name not in SHAPES:
        raise InvalidInputError(f"Unknown excitation '{name}'; expected one of {EXCITATIONS}")
    samples = int(round(cfg.duration / dt))
    if samples < 2:
        raise InvalidInputError(f"Excitation duration {cfg.duration}s is shorter than two samples")
    t = np.arange(samples) * dt
    u = cfg.amplitude * SHAPES[name](t, cfg, rng)
    return np.clip(u, -limit, limit)
