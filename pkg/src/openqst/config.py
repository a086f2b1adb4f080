"""Experiment configuration as a flat ``section.key = value`` text file.

Blank lines and ``#`` comments are ignored.  Optional numeric settings take
the word ``auto`` to mean "use the documented default for this run type".
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import (
    DEFAULT_COMPONENTS,
    DEFAULT_SEGMENTS,
    T_TOTAL,
    FourierCombo,
    IdealSine,
    NoControl,
    PiecewiseSine,
    default_base_frequency,
    default_half_period,
    ideal_intensity,
)
from .dynamics import DEFAULT_STEPS, BathParams
from .losses import SimulationSetup
from .optimizer import AdamConfig, ParamBounds
from .spin_model import ChainSpec, LindbladKind, pst_couplings

AUTO = "auto"
MODELS = ("qsd", "lindblad")
FAMILIES = ("none", "ideal", "piecewise", "fourier")

# documented per-target defaults for the "auto" optimizer settings
COUPLING_DEFAULTS = {"alpha": 0.01, "penalty_weight": 0.01, "n_steps": 200}
PULSE_DEFAULTS = {"alpha": 1.0, "penalty_weight": 1e-4, "n_steps": 500}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ChainSection:
    n_sites: int = 6
    couplings: tuple[float, ...] | None = None  # None means PST
    optimize: bool = False


@dataclass(frozen=True)
class BathSection:
    gamma_coupling: float = 0.1
    gamma_memory: float = 2.0
    temperature: float = 10.0


@dataclass(frozen=True)
class LindbladSection:
    kind: str = LindbladKind.LOWERING.value


@dataclass(frozen=True)
class DynamicsSection:
    model: str = "qsd"


@dataclass(frozen=True)
class ControlSection:
    family: str = "none"
    segments: int = DEFAULT_SEGMENTS
    components: int = DEFAULT_COMPONENTS
    intensity: float | None = None
    half_period: float | None = None
    base_frequency: float | None = None
    amplitudes: tuple[float, ...] | None = None
    optimize: bool = False


@dataclass(frozen=True)
class HorizonSection:
    t_total: float = T_TOTAL
    n_steps: int = DEFAULT_STEPS


@dataclass(frozen=True)
class OptimizerSection:
    alpha: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    loss_ceiling: float = 1e-3
    max_iterations: int = 1000
    penalty_weight: float | None = None
    fd_step: float = 1e-3
    n_steps: int | None = None
    coupling_lower: float = -3.0
    coupling_upper: float = -2.0
    amplitude_bound: float | None = None


@dataclass(frozen=True)
class OutputSection:
    dir: str = "results"


@dataclass(frozen=True)
class RunSection:
    label: str = "run"


SECTIONS = {
    "chain": ChainSection,
    "bath": BathSection,
    "lindblad": LindbladSection,
    "dynamics": DynamicsSection,
    "control": ControlSection,
    "horizon": HorizonSection,
    "optimizer": OptimizerSection,
    "output": OutputSection,
    "run": RunSection,
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float(text: str) -> float:
    low = text.strip().lower()
    if low in ("pi", "pi/4"):
        return math.pi if low == "pi" else math.pi / 4
    return float(text)


def _parse_list(text: str) -> tuple[float, ...]:
    return tuple(_parse_float(v) for v in text.split(",") if v.strip())


_PARSERS = {
    "int": int,
    "float": _parse_float,
    "bool": _parse_bool,
    "str": str.strip,
    "int | None": int,
    "float | None": _parse_float,
    "tuple[float, ...] | None": _parse_list,
}


def _format(value) -> str:
    if value is None:
        return AUTO
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _field_type(section: str, key: str) -> str:
    for f in dataclasses.fields(SECTIONS[section]):
        if f.name == key:
            return f.type
    raise ConfigError(f"unknown key {section}.{key}")


@dataclass(frozen=True)
class ExperimentConfig:
    chain: ChainSection = field(default_factory=ChainSection)
    bath: BathSection = field(default_factory=BathSection)
    lindblad: LindbladSection = field(default_factory=LindbladSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    control: ControlSection = field(default_factory=ControlSection)
    horizon: HorizonSection = field(default_factory=HorizonSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    output: OutputSection = field(default_factory=OutputSection)
    run: RunSection = field(default_factory=RunSection)

    # --- flat key access -------------------------------------------------

    def to_flat(self) -> dict[str, str]:
        flat = {}
        for name in SECTIONS:
            section = getattr(self, name)
            for f in dataclasses.fields(section):
                flat[f"{name}.{f.name}"] = _format(getattr(section, f.name))
        return flat

    def with_values(self, values: dict[str, str]) -> "ExperimentConfig":
        """Copy with dotted keys replaced by parsed text values."""
        updates: dict[str, dict] = {}
        for dotted, text in values.items():
            section, _, key = dotted.strip().partition(".")
            if section not in SECTIONS or not key:
                raise ConfigError(f"unknown key {dotted!r}")
            kind = _field_type(section, key)
            text = str(text).strip()
            try:
                if text.lower() == AUTO and kind.endswith("| None"):
                    value = None
                elif section == "chain" and key == "couplings" and text.lower() == "pst":
                    value = None
                else:
                    value = _PARSERS[kind](text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {dotted}: {text!r} ({exc})") from None
            updates.setdefault(section, {})[key] = value
        cfg = dataclasses.replace(
            self, **{s: dataclasses.replace(getattr(self, s), **kv) for s, kv in updates.items()}
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key = key.strip()
            if key in values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            values[key] = value
        try:
            return cls().with_values(values)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        return cls.from_text(text, str(path))

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_flat().items())

    # --- validation ------------------------------------------------------

    def validate(self) -> None:
        c = self.chain
        if c.n_sites < 2:
            raise ConfigError("chain.n_sites must be at least 2")
        if c.couplings is not None and len(c.couplings) != c.n_sites - 1:
            raise ConfigError(f"chain.couplings needs {c.n_sites - 1} values, got {len(c.couplings)}")
        if c.optimize and self.control.optimize:
            raise ConfigError("chain.optimize and control.optimize cannot both be true")
        try:
            LindbladKind.parse(self.lindblad.kind)
            BathParams(self.bath.gamma_coupling, self.bath.gamma_memory, self.bath.temperature)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.dynamics.model not in MODELS:
            raise ConfigError(f"dynamics.model must be one of {MODELS}")
        ctl = self.control
        if ctl.family not in FAMILIES:
            raise ConfigError(f"control.family must be one of {FAMILIES}")
        if ctl.optimize and ctl.family not in ("piecewise", "fourier"):
            raise ConfigError("control.optimize needs control.family = piecewise or fourier")
        if ctl.segments < 1 or ctl.components < 1:
            raise ConfigError("control.segments and control.components must be positive")
        if ctl.amplitudes is not None and ctl.family in ("piecewise", "fourier"):
            want = ctl.segments if ctl.family == "piecewise" else ctl.components
            if len(ctl.amplitudes) != want:
                raise ConfigError(f"control.amplitudes needs {want} values for family {ctl.family}")
        if not self.horizon.t_total > 0:
            raise ConfigError("horizon.t_total must be positive")
        try:
            self.adam_config()
            self.coupling_bounds()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # --- derived objects -------------------------------------------------

    @property
    def optimizing(self) -> str | None:
        if self.chain.optimize:
            return "couplings"
        if self.control.optimize:
            return "pulses"
        return None

    def _auto(self, name: str):
        value = getattr(self.optimizer, name)
        if value is not None:
            return value
        defaults = PULSE_DEFAULTS if self.optimizing == "pulses" else COUPLING_DEFAULTS
        return defaults[name]

    def adam_config(self) -> AdamConfig:
        o = self.optimizer
        return AdamConfig(
            alpha=self._auto("alpha"),
            beta1=o.beta1,
            beta2=o.beta2,
            epsilon=o.epsilon,
            loss_ceiling=o.loss_ceiling,
            max_iterations=o.max_iterations,
            penalty_weight=self._auto("penalty_weight"),
            fd_step=o.fd_step,
        )

    @property
    def loss_steps(self) -> int:
        return self._auto("n_steps")

    def coupling_bounds(self) -> ParamBounds:
        o = self.optimizer
        return ParamBounds.uniform(o.coupling_lower, o.coupling_upper, self.chain.n_sites - 1)

    def amplitude_bounds(self, size: int) -> ParamBounds:
        bound = self.optimizer.amplitude_bound
        if bound is None:
            bound = self.ideal_intensity
        return ParamBounds.uniform(-bound, bound, size)

    @property
    def bath_params(self) -> BathParams:
        return BathParams(self.bath.gamma_coupling, self.bath.gamma_memory, self.bath.temperature)

    @property
    def lindblad_kind(self) -> LindbladKind:
        return LindbladKind.parse(self.lindblad.kind)

    @property
    def chain_spec(self) -> ChainSpec:
        if self.chain.couplings is None:
            return ChainSpec.pst(self.chain.n_sites)
        return ChainSpec(self.chain.n_sites, self.chain.couplings)

    def setup(self, n_steps: int | None = None) -> SimulationSetup:
        return SimulationSetup(
            n_sites=self.chain.n_sites,
            bath=self.bath_params,
            lindblad_kind=self.lindblad_kind,
            t_total=self.horizon.t_total,
            n_steps=self.horizon.n_steps if n_steps is None else n_steps,
            model=self.dynamics.model,
            couplings=self.chain_spec.couplings,
        )

    @property
    def half_period(self) -> float:
        if self.control.half_period is not None:
            return self.control.half_period
        return default_half_period(self.horizon.t_total, self.control.segments)

    @property
    def ideal_intensity(self) -> float:
        if self.control.intensity is not None:
            return self.control.intensity
        return ideal_intensity(self.half_period)

    @property
    def base_frequency(self) -> float:
        if self.control.base_frequency is not None:
            return self.control.base_frequency
        return default_base_frequency(self.horizon.t_total, self.control.segments)

    def initial_couplings(self) -> np.ndarray:
        if self.chain.couplings is None:
            return pst_couplings(self.chain.n_sites)
        return np.asarray(self.chain.couplings, dtype=float)

    def initial_amplitudes(self) -> np.ndarray:
        """Configured amplitudes, else the set that reproduces the ideal sine pulse."""
        ctl = self.control
        if ctl.amplitudes is not None:
            return np.asarray(ctl.amplitudes, dtype=float)
        intensity = self.ideal_intensity
        if ctl.family == "piecewise":
            return np.full(ctl.segments, intensity)
        amps = np.zeros(ctl.components)
        amps[0] = intensity
        return amps

    def pulse_shape(self, amplitudes=None):
        family = self.control.family
        if family == "none":
            return NoControl()
        if family == "ideal":
            return IdealSine(self.ideal_intensity, self.half_period)
        amps = self.initial_amplitudes() if amplitudes is None else amplitudes
        if family == "piecewise":
            return PiecewiseSine(tuple(amps), self.horizon.t_total)
        return FourierCombo(tuple(amps), self.base_frequency)
