"""Quantum state transfer through an open XY spin chain.

The chain's density matrix is propagated under a non-Markovian bath model or
its Lindblad limit.  Couplings or LEO pulse amplitudes can be tuned with Adam.
"""

from .control import (
    FourierCombo,
    IdealSine,
    LeoControl,
    NoControl,
    Passage,
    PiecewiseSine,
    ideal_intensity,
    pulse_value,
    zero_area_residual,
)
from .dynamics import (
    BathParams,
    DivergenceError,
    DynamicState,
    Trajectory,
    fidelity,
    max_fidelity_and_arrival,
    propagate_closed,
    propagate_lindblad,
    propagate_qsd,
    qsd_rhs,
)
from .losses import CouplingLoss, PulseLoss, SimulationSetup, coupling_loss, pulse_loss
from .optimizer import (
    AdamConfig,
    AdamState,
    OptimizationReport,
    ParamBounds,
    Termination,
    adam_step,
    finite_diff_gradient,
    optimize,
)
from .spin_model import (
    ChainSpec,
    LindbladKind,
    build_xy_hamiltonian,
    collective_lindblad,
    pst_couplings,
)

__version__ = "0.1.0"

__all__ = [
    "AdamConfig",
    "AdamState",
    "BathParams",
    "ChainSpec",
    "CouplingLoss",
    "DivergenceError",
    "DynamicState",
    "FourierCombo",
    "IdealSine",
    "LeoControl",
    "LindbladKind",
    "NoControl",
    "OptimizationReport",
    "ParamBounds",
    "Passage",
    "PiecewiseSine",
    "PulseLoss",
    "SimulationSetup",
    "Termination",
    "Trajectory",
    "adam_step",
    "build_xy_hamiltonian",
    "collective_lindblad",
    "coupling_loss",
    "fidelity",
    "finite_diff_gradient",
    "ideal_intensity",
    "max_fidelity_and_arrival",
    "optimize",
    "propagate_closed",
    "propagate_lindblad",
    "propagate_qsd",
    "pst_couplings",
    "pulse_loss",
    "pulse_value",
    "qsd_rhs",
    "zero_area_residual",
]
