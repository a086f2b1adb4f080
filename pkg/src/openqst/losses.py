"""Transfer losses ``1 - F + lambda * penalty`` for couplings and pulses.

F is the largest fidelity reached along the trajectory.  Both objectives
evaluate whole batches of parameter vectors in one propagation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import (
    DEFAULT_SEGMENTS,
    T_TOTAL,
    FourierCombo,
    Passage,
    PiecewiseSine,
    default_base_frequency,
)
from .dynamics import DEFAULT_STEPS, BathParams, evolve_batch
from .spin_model import ChainSpec, LindbladKind, collective_lindblad, xy_hamiltonians

PULSE_FAMILIES = ("piecewise", "fourier")
MIN_PULSE_GRID = 2001


@dataclass(frozen=True)
class SimulationSetup:
    """Everything about a run except the parameters being optimised."""

    n_sites: int
    bath: BathParams
    lindblad_kind: LindbladKind = LindbladKind.LOWERING
    t_total: float = T_TOTAL
    n_steps: int = DEFAULT_STEPS
    model: str = "qsd"
    couplings: tuple[float, ...] | None = field(default=None)

    @property
    def chain(self) -> ChainSpec:
        if self.couplings is None:
            return ChainSpec.pst(self.n_sites)
        return ChainSpec(self.n_sites, self.couplings)

    @property
    def lindblad(self) -> np.ndarray:
        return collective_lindblad(self.lindblad_kind, self.n_sites)


def _max_fidelities(setup: SimulationSetup, hamiltonians, pulses=None, passage=None) -> np.ndarray:
    res = evolve_batch(
        hamiltonians,
        setup.lindblad,
        setup.bath,
        n_sites=setup.n_sites,
        model=setup.model,
        t_total=setup.t_total,
        n_steps=setup.n_steps,
        pulses=pulses,
        passage=passage,
    )
    fmax = res.fidelities.max(axis=1)
    fmax[res.diverged_at >= 0] = np.nan
    return fmax


class CouplingLoss:
    """``1 - F(J) + lambda * max|J|``."""

    def __init__(self, setup: SimulationSetup, penalty_weight: float = 0.01):
        self.setup = setup
        self.penalty_weight = penalty_weight

    def batch(self, couplings) -> tuple[np.ndarray, np.ndarray]:
        couplings = np.atleast_2d(np.asarray(couplings, dtype=float))
        fids = _max_fidelities(self.setup, xy_hamiltonians(couplings, self.setup.n_sites))
        losses = 1.0 - fids + self.penalty_weight * np.abs(couplings).max(axis=1)
        return losses, fids

    def __call__(self, couplings) -> tuple[float, float]:
        losses, fids = self.batch(couplings)
        return float(losses[0]), float(fids[0])


class PulseLoss:
    """``1 - F(I) + lambda * max_t |c(t)|`` for LEO pulses on the PST passage."""

    def __init__(
        self,
        setup: SimulationSetup,
        family: str = "fourier",
        penalty_weight: float = 0.01,
        base_frequency: float | None = None,
    ):
        if family not in PULSE_FAMILIES:
            raise ValueError(f"pulse family must be one of {PULSE_FAMILIES}, got {family!r}")
        self.setup = setup
        self.family = family
        self.penalty_weight = penalty_weight
        self.base_frequency = base_frequency or default_base_frequency(setup.t_total, DEFAULT_SEGMENTS)
        self.passage = Passage.for_chain(setup.n_sites)
        self._h = setup.chain
        n_grid = max(2 * setup.n_steps + 1, MIN_PULSE_GRID)
        self.grid = np.linspace(0.0, setup.t_total, n_grid)

    def shape(self, amplitudes):
        if self.family == "piecewise":
            return PiecewiseSine(tuple(amplitudes), self.setup.t_total)
        return FourierCombo(tuple(amplitudes), self.base_frequency)

    def c_max(self, amplitudes) -> float:
        return float(np.abs(self.shape(amplitudes).values(self.grid)).max())

    def batch(self, amplitudes) -> tuple[np.ndarray, np.ndarray]:
        amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=float))
        shapes = [self.shape(a) for a in amplitudes]
        h = xy_hamiltonians(np.asarray(self._h.couplings)[None], self.setup.n_sites)
        h = np.repeat(h, len(shapes), axis=0)
        fids = _max_fidelities(self.setup, h, shapes, self.passage)
        c_max = np.array([np.abs(s.values(self.grid)).max() for s in shapes])
        return 1.0 - fids + self.penalty_weight * c_max, fids

    def __call__(self, amplitudes) -> tuple[float, float]:
        losses, fids = self.batch(amplitudes)
        return float(losses[0]), float(fids[0])


def coupling_loss(couplings, setup: SimulationSetup, penalty_weight: float = 0.01) -> tuple[float, float]:
    return CouplingLoss(setup, penalty_weight)(couplings)


def pulse_loss(
    amplitudes,
    family: str,
    setup: SimulationSetup,
    penalty_weight: float = 0.01,
    base_frequency: float | None = None,
) -> tuple[float, float]:
    return PulseLoss(setup, family, penalty_weight, base_frequency)(amplitudes)


