"""
Run configuration.

The file is INI-like: `[section]` headers followed by `key = value` lines.
Every section maps onto a dataclass; unknown sections or keys are errors.
Keys ending in `_deg` are given in degrees and stored in radians under the
name without the suffix.
"""

import configparser
import logging
import math
import os
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from dotenv import load_dotenv

from src.control.kmpc import KmpcConfig
from src.errors import ConfigError, InvalidInputError
from src.identification.lifting import LiftingSpec
from src.optimization.admm_qp import QpSettings
from src.plant.tower import PlantParams

logger = logging.getLogger(__name__)

SCENARIOS = ("initial_tilt", "excite_then_damp", "pulse_disturbance",
             "step_tracking", "ramp_tracking", "collect")
CONTROLLERS = ("lqr", "kmpc", "none")
PULSE_CHANNELS = ("top", "base")


@dataclass
class EdmdSettings:
    ridge: Optional[float] = None
    rtol: float = 1e-10
    eval_horizon: int = 50


@dataclass
class LqrSettings:
    q_phi: float = 10.0
    q_phidot: float = 1.0
    r: float = 100.0


@dataclass
class KmpcSettings:
    horizon: int = 10
    q_phi: float = 10.0
    q_phidot: float = 1.0
    terminal_scale: float = 10.0
    r: float = 0.01
    r_delta: float = 100.0
    u_min: Optional[float] = None
    u_max: Optional[float] = None
    du_min: Optional[float] = None
    du_max: Optional[float] = None
    disturbance_gain: float = 0.1
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    max_iter: int = 4000

    def to_config(self, torque_limit: float) -> KmpcConfig:
        """Controller configuration; missing input bounds default to the actuator limit."""
        Qe = np.diag([self.q_phi, self.q_phidot])
        return KmpcConfig(
            Np=self.horizon,
            Qe=Qe,
            S=self.terminal_scale * Qe,
            R=np.array([[self.r]]),
            R_delta=np.array([[self.r_delta]]),
            u_min=-torque_limit if self.u_min is None else self.u_min,
            u_max=torque_limit if self.u_max is None else self.u_max,
            du_min=self.du_min,
            du_max=self.du_max,
            disturbance_gain=self.disturbance_gain,
        )

    def qp_settings(self) -> QpSettings:
        return QpSettings(eps_abs=self.eps_abs, eps_rel=self.eps_rel, max_iter=self.max_iter)


@dataclass
class ScenarioSettings:
    name: str = "initial_tilt"
    duration: float = 10.0
    initial_tilt: float = math.radians(-20.0)
    excitation_amplitude: float = 0.1
    excitation_frequency: float = 2.5
    switch_time: float = 6.0
    pulse_amplitude: float = 0.2
    pulse_width: float = 0.5
    pulse_times: Tuple[float, ...] = (1.0, 4.0)
    pulse_channel: str = "top"
    reference_times: Tuple[float, ...] = (0.0, 5.0, 10.0, 15.0)
    reference_levels: Tuple[float, ...] = tuple(math.radians(v) for v in (0.0, 2.5, -2.5, 1.0))
    input_disturbance: float = 0.0
    warmup: float = 1.0
    compare_uncontrolled: bool = True


@dataclass
class CollectSettings:
    trajectories: int = 6
    duration: float = 20.0
    amplitude: float = 0.15
    target_pairs: int = 5000
    min_output_std: float = 1e-6
    chirp_f0: float = 0.2
    chirp_f1: float = 8.0
    sine_low_frequency: float = 1.0
    sine_high_frequency: float = 4.5
    step_hold: float = 0.5
    noise_cutoff: float = 6.0
    pulse_period: float = 1.5
    pulse_width: float = 0.2


@dataclass
class NoiseSettings:
    amplitude: float = 0.0


@dataclass
class RunSettings:
    controller: str = "lqr"
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1


@dataclass
class RunConfig:
    """Everything one pipeline invocation needs."""
    plant: PlantParams = field(default_factory=PlantParams)
    lifting: LiftingSpec = field(default_factory=LiftingSpec)
    edmd: EdmdSettings = field(default_factory=EdmdSettings)
    lqr: LqrSettings = field(default_factory=LqrSettings)
    kmpc: KmpcSettings = field(default_factory=KmpcSettings)
    scenario: ScenarioSettings = field(default_factory=ScenarioSettings)
    collect: CollectSettings = field(default_factory=CollectSettings)
    noise: NoiseSettings = field(default_factory=NoiseSettings)
    run: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self):
        validate(self)

    @property
    def output_dir(self) -> Path:
        return Path(self.run.output_dir)

    @property
    def predictor_path(self) -> Path:
        return self.output_dir / "predictor.txt"

    @property
    def training_dir(self) -> Path:
        return self.output_dir / "training"

    def with_overrides(self,
                       seed: Optional[int] = None,
                       output_dir: Optional[Union[str, Path]] = None,
                       scenario: Optional[str] = None,
                       controller: Optional[str] = None) -> "RunConfig":
        """Copy with CLI overrides applied."""
        run = replace(
            self.run,
            seed=self.run.seed if seed is None else int(seed),
            output_dir=self.run.output_dir if output_dir is None else str(output_dir),
            controller=self.run.controller if controller is None else controller,
        )
        scen = self.scenario if scenario is None else replace(self.scenario, name=scenario)
        return replace(self, run=run, scenario=scen)


SECTIONS: Dict[str, type] = {
    "plant": PlantParams,
    "lifting": LiftingSpec,
    "edmd": EdmdSettings,
    "lqr": LqrSettings,
    "kmpc": KmpcSettings,
    "scenario": ScenarioSettings,
    "collect": CollectSettings,
    "noise": NoiseSettings,
    "run": RunSettings,
}


def validate(config: RunConfig):
    if config.scenario.name not in SCENARIOS:
        raise ConfigError(f"Unknown scenario '{config.scenario.name}'; expected one of {SCENARIOS}")
    if config.run.controller not in CONTROLLERS:
        raise ConfigError(f"Unknown controller '{config.run.controller}'; expected one of {CONTROLLERS}")
    if config.scenario.pulse_channel not in PULSE_CHANNELS:
        raise ConfigError(f"pulse_channel must be one of {PULSE_CHANNELS}")
    if len(config.scenario.reference_times) != len(config.scenario.reference_levels):
        raise ConfigError("reference_times and reference_levels must have the same length")
    if config.scenario.duration <= 0 or config.collect.duration <= 0:
        raise ConfigError("durations must be positive")
    if config.collect.trajectories < 1:
        raise ConfigError("collect.trajectories must be >= 1")
    if config.noise.amplitude < 0:
        raise ConfigError("noise.amplitude must be non-negative")
    if config.run.workers < 1:
        raise ConfigError("run.workers must be >= 1")


def _convert(raw: str, annotation: Any, key: str, degrees: bool) -> Any:
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    text = raw.strip()

    if origin is Union and type(None) in args:
        if text.lower() in ("", "none", "auto"):
            return None
        inner = next(a for a in args if a is not type(None))
        return _convert(raw, inner, key, degrees)
    if origin in (tuple, Tuple):
        items = [item for item in text.replace(",", " ").split() if item]
        return tuple(_convert(item, args[0], key, degrees) for item in items)
    if annotation is bool:
        lowered = text.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"'{key}' expects a boolean, got '{raw}'")
    if annotation is int:
        try:
            return int(text)
        except ValueError as e:
            raise ConfigError(f"'{key}' expects an integer, got '{raw}'") from e
    if annotation is float:
        try:
            value = float(text)
        except ValueError as e:
            raise ConfigError(f"'{key}' expects a number, got '{raw}'") from e
        return math.radians(value) if degrees else value
    return text


def _build_section(name: str, cls: type, items: Dict[str, str]) -> Any:
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init}
    kwargs = {}
    for key, raw in items.items():
        degrees = key.endswith("_deg")
        target = key[:-4] if degrees else key
        if target not in known:
            raise ConfigError(f"Unknown key '{key}' in section [{name}]")
        if target in kwargs:
            raise ConfigError(f"Key '{target}' given twice in section [{name}]")
        kwargs[target] = _convert(raw, hints[target], f"{name}.{key}", degrees)
    try:
        return cls(**kwargs)
    except (InvalidInputError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid values in section [{name}]: {e}") from e


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse configuration text.

    Raises:
        ConfigError: syntax errors, unknown sections or keys, invalid values
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"Cannot parse {source}: {e}") from e

    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"Unknown section(s) {unknown} in {source}")

    sections = {name: _build_section(name, cls, dict(parser.items(name)))
                for name, cls in SECTIONS.items() if parser.has_section(name)}
    return RunConfig(**sections)


def load_config(config_path: Optional[Union[str, Path]] = None) -> RunConfig:
    """Load configuration from `config_path`, else $TOWER_CONFIG, else defaults.

    A `.env` file in the working directory may set TOWER_CONFIG.
    """
    load_dotenv()
    if not config_path:
        config_path = os.getenv("TOWER_CONFIG")
    if not config_path:
        logger.info("No config file given, using built-in defaults")
        return RunConfig()

    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    config = parse_config(path.read_text(), source=str(path))
    logger.info(f"Loaded configuration from {path}")
    return config
