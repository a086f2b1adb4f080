"""LEO control: reference passage, control Hamiltonian and pulse families."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy import integrate, optimize, special

from .spin_model import ChainSpec, basis_state, build_xy_hamiltonian

T_TOTAL = np.pi / 4
DEFAULT_SEGMENTS = 5
DEFAULT_COMPONENTS = 10

_HORIZON_SLACK = 1e-12


class PulseDomainError(ValueError):
    """Raised when a pulse is evaluated outside its time horizon."""


def bessel_j0_first_root() -> float:
    return optimize.brentq(special.j0, 2.0, 3.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def ideal_intensity(half_period: float) -> float:
    """Sine-pulse intensity satisfying ``J0(I tau / pi) = 0`` at the first root."""
    if not half_period > 0:
        raise ValueError(f"half period must be positive, got {half_period}")
    return np.pi * bessel_j0_first_root() / half_period


@dataclass(frozen=True)
class NoControl:
    def values(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    @property
    def horizon(self):
        return None


@dataclass(frozen=True)
class IdealSine:
    """``c(t) = I sin(pi t / tau)`` with ``tau`` the half period."""

    intensity: float
    half_period: float

    def __post_init__(self):
        if not self.half_period > 0:
            raise ValueError("half_period must be positive")

    def values(self, t):
        return self.intensity * np.sin(np.pi * np.asarray(t, dtype=float) / self.half_period)

    @property
    def horizon(self):
        return None


@dataclass(frozen=True)
class PiecewiseSine:
    """Sine carrier ``sin(w t)`` under a P-segment piecewise-constant envelope.

    Each segment has width ``t_total / P`` and ``w = 2 pi P / t_total``, so every
    segment holds exactly one carrier period.
    """

    amplitudes: tuple[float, ...]
    t_total: float = T_TOTAL

    def __post_init__(self):
        amps = tuple(float(a) for a in np.ravel(self.amplitudes))
        if not amps:
            raise ValueError("PiecewiseSine needs at least one amplitude")
        if not self.t_total > 0:
            raise ValueError("t_total must be positive")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def segment_width(self) -> float:
        return self.t_total / len(self.amplitudes)

    @property
    def frequency(self) -> float:
        return 2 * np.pi / self.segment_width

    @property
    def horizon(self):
        return self.t_total

    @property
    def breakpoints(self) -> np.ndarray:
        """Segment edges, where the envelope jumps."""
        return np.arange(len(self.amplitudes) + 1) * self.segment_width

    def values(self, t):
        t = np.asarray(t, dtype=float)
        seg = np.clip(np.floor(t / self.segment_width).astype(int), 0, len(self.amplitudes) - 1)
        return np.asarray(self.amplitudes)[seg] * np.sin(self.frequency * t)


@dataclass(frozen=True)
class FourierCombo:
    """``c(t) = sum_i I_i sin((i + 1) w t)``."""

    amplitudes: tuple[float, ...]
    base_frequency: float

    def __post_init__(self):
        amps = tuple(float(a) for a in np.ravel(self.amplitudes))
        if not amps:
            raise ValueError("FourierCombo needs at least one amplitude")
        if not self.base_frequency > 0:
            raise ValueError("base_frequency must be positive")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def horizon(self):
        return None

    def values(self, t):
        t = np.asarray(t, dtype=float)
        harmonics = np.arange(1, len(self.amplitudes) + 1)
        phases = np.multiply.outer(t, harmonics * self.base_frequency)
        return np.sin(phases) @ np.asarray(self.amplitudes)


PulseShape = Union[NoControl, IdealSine, PiecewiseSine, FourierCombo]


def default_base_frequency(t_total: float = T_TOTAL, n_segments: int = DEFAULT_SEGMENTS) -> float:
    """Carrier frequency ``2 pi / dt`` with ``dt = t_total / n_segments``."""
    return 2 * np.pi * n_segments / t_total


def default_half_period(t_total: float = T_TOTAL, n_segments: int = DEFAULT_SEGMENTS) -> float:
    return t_total / (2 * n_segments)


def pulse_value(shape: PulseShape, t: float, t_total: float | None = None) -> float:
    """Control amplitude ``c(t)``.

    ``t`` must lie in ``[0, horizon]`` where the horizon is ``t_total`` if given,
    else the shape's own horizon (PiecewiseSine), else unbounded above.
    """
    horizon = t_total if t_total is not None else shape.horizon
    if t < -_HORIZON_SLACK or (horizon is not None and t > horizon * (1 + _HORIZON_SLACK)):
        raise PulseDomainError(f"t={t} outside [0, {horizon}]")
    return float(shape.values(t))


def zero_area_residual(
    shape: PulseShape | Callable[[np.ndarray], np.ndarray],
    t_total: float,
    nodes: int = 20001,
) -> float:
    """``|int_0^T c(t) dt|`` by composite Simpson quadrature.

    Shapes with ``breakpoints`` are integrated piece by piece so that every
    kink of the envelope sits on a node.
    """
    if nodes < 10_000:
        raise ValueError("use at least 10^4 quadrature nodes")
    edges = np.asarray(getattr(shape, "breakpoints", ()), dtype=float)
    edges = np.unique(np.concatenate([[0.0, t_total], edges[(edges > 0) & (edges < t_total)]]))
    per_piece = max(nodes // (len(edges) - 1), 101) | 1
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        t = np.linspace(a, b, per_piece)
        c = shape.values(t) if hasattr(shape, "values") else np.asarray(shape(t), dtype=float)
        total += float(integrate.simpson(c, x=t))
    return abs(total)


class Passage:
    """Reference trajectory ``|Psi(t)> = exp(-i H_PST t) |1>``.

    H_PST is diagonalised once; every ``state(t)`` afterwards is exact to
    machine precision.
    """

    def __init__(self, spec_pst: ChainSpec):
        self.spec = spec_pst
        energies, vectors = np.linalg.eigh(build_xy_hamiltonian(spec_pst))
        self._energies = energies
        self._vectors = vectors
        self._start = vectors.conj().T @ basis_state(1, spec_pst.n_sites)

    @classmethod
    def for_chain(cls, n_sites: int) -> "Passage":
        return cls(ChainSpec.pst(n_sites))

    @property
    def dim(self) -> int:
        return self._vectors.shape[0]

    def state(self, t: float) -> np.ndarray:
        return self._vectors @ (np.exp(-1j * self._energies * t) * self._start)

    def states(self, times) -> np.ndarray:
        """Passage states for many times, shape (len(times), dim)."""
        phases = np.exp(-1j * np.multiply.outer(np.asarray(times, dtype=float), self._energies))
        return (phases * self._start) @ self._vectors.T

    def projector(self, t: float) -> np.ndarray:
        psi = self.state(t)
        return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class PassageCache:
    """Passage states tabulated on a fixed time grid."""

    sample_times: np.ndarray
    states: np.ndarray

    @classmethod
    def build(cls, passage: Passage, times) -> "PassageCache":
        times = np.asarray(times, dtype=float)
        return cls(times, passage.states(times))

    @cached_property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def passage_state(spec_pst: ChainSpec, t: float) -> np.ndarray:
    return Passage(spec_pst).state(t)


def leo_hamiltonian(c_value: float, passage: np.ndarray) -> np.ndarray:
    """Rank-one control Hamiltonian ``c |Psi><Psi|``."""
    passage = np.asarray(passage, dtype=complex)
    return c_value * np.outer(passage, passage.conj())


@dataclass(frozen=True)
class LeoControl:
    """Pulse shape bound to a passage; supplies ``H_LEO(t)`` to the propagators."""

    shape: PulseShape
    passage: Passage

    def coefficient(self, t):
        return self.shape.values(t)

    def hamiltonian(self, t: float) -> np.ndarray:
        return float(self.shape.values(t)) * self.passage.projector(t)
