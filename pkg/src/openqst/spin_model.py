"""Spin-1/2 XY chain: Hilbert space, Hamiltonians, collective bath operators.

Basis convention: computational basis states are indexed by the bit string of
the chain, site 1 being the most significant bit.  Pauli matrices take their
standard form in the local basis ``(|0>, |1>)`` so that ``sigma_z |0> = |0>``
and ``sigma_minus = (sigma_x - i sigma_y) / 2 = |1><0|``.  The transferred
excitation is a ``1`` bit: ``|1> = |100...0>`` and ``|N> = |00...01>``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import reduce

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = (SIGMA_X - 1j * SIGMA_Y) / 2
IDENTITY_2 = np.eye(2, dtype=complex)


class InvalidChainError(ValueError):
    """Raised for chains with fewer than two sites or a bad coupling list."""


class InvalidSiteError(ValueError):
    """Raised when a site index falls outside ``1..n_sites``."""


def _check_n_sites(n_sites: int) -> int:
    if int(n_sites) != n_sites or n_sites < 2:
        raise InvalidChainError(f"a chain needs at least 2 sites, got {n_sites!r}")
    return int(n_sites)


@dataclass(frozen=True)
class ChainSpec:
    """Chain length and the nearest-neighbour couplings ``J_{i,i+1}``."""

    n_sites: int
    couplings: tuple[float, ...]

    def __post_init__(self):
        n = _check_n_sites(self.n_sites)
        couplings = tuple(float(j) for j in np.ravel(self.couplings))
        if len(couplings) != n - 1:
            raise InvalidChainError(
                f"{n} sites need {n - 1} couplings, got {len(couplings)}"
            )
        if not all(np.isfinite(couplings)):
            raise InvalidChainError("couplings must be finite")
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "couplings", couplings)

    @classmethod
    def pst(cls, n_sites: int) -> "ChainSpec":
        return cls(n_sites, tuple(pst_couplings(n_sites)))

    @property
    def dim(self) -> int:
        return 2**self.n_sites


class LindbladKind(str, enum.Enum):
    """Collective system operator through which the chain couples to the bath."""

    LOWERING = "lowering"
    SIGMA_X = "sigma_x"
    SIGMA_Z = "sigma_z"

    @classmethod
    def parse(cls, name: "str | LindbladKind") -> "LindbladKind":
        if isinstance(name, cls):
            return name
        aliases = {"sigma_minus": cls.LOWERING, "minus": cls.LOWERING, "x": cls.SIGMA_X, "z": cls.SIGMA_Z}
        key = str(name).strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


def pst_couplings(n_sites: int) -> np.ndarray:
    """Perfect-state-transfer layout ``J_{i,i+1} = -sqrt(i (N - i))``."""
    n = _check_n_sites(n_sites)
    i = np.arange(1, n)
    return -np.sqrt(i * (n - i))


def site_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Embed a single-site 2x2 operator at ``site`` (1-based) in the full space."""
    if not 1 <= site <= n_sites:
        raise InvalidSiteError(f"site {site} outside 1..{n_sites}")
    factors = [op if k == site else IDENTITY_2 for k in range(1, n_sites + 1)]
    return reduce(np.kron, factors)


def bond_operators(n_sites: int) -> np.ndarray:
    """Stack of ``sx_i sx_{i+1} + sy_i sy_{i+1}`` for ``i = 1..N-1``, shape (N-1, 2^N, 2^N)."""
    n = _check_n_sites(n_sites)
    sx = [site_operator(SIGMA_X, i, n) for i in range(1, n + 1)]
    sy = [site_operator(SIGMA_Y, i, n) for i in range(1, n + 1)]
    return np.stack([sx[i] @ sx[i + 1] + sy[i] @ sy[i + 1] for i in range(n - 1)])


def build_xy_hamiltonian(spec: ChainSpec) -> np.ndarray:
    """Dense XY Hamiltonian of the chain (complex dtype, real entries)."""
    return xy_hamiltonians(np.asarray(spec.couplings)[None, :], spec.n_sites)[0]


def xy_hamiltonians(couplings: np.ndarray, n_sites: int) -> np.ndarray:
    """XY Hamiltonians for a batch of coupling vectors, shape (B, 2^N, 2^N)."""
    couplings = np.atleast_2d(np.asarray(couplings, dtype=float))
    if couplings.shape[1] != n_sites - 1:
        raise InvalidChainError(
            f"{n_sites} sites need {n_sites - 1} couplings, got {couplings.shape[1]}"
        )
    return np.einsum("bk,kij->bij", couplings, bond_operators(n_sites).real).astype(complex)


def collective_lindblad(kind: LindbladKind | str, n_sites: int) -> np.ndarray:
    """Sum of one single-site operator over every site of the chain."""
    kind = LindbladKind.parse(kind)
    n = _check_n_sites(n_sites)
    single = {
        LindbladKind.LOWERING: SIGMA_MINUS,
        LindbladKind.SIGMA_X: SIGMA_X,
        LindbladKind.SIGMA_Z: SIGMA_Z,
    }[kind]
    return sum(site_operator(single, i, n) for i in range(1, n + 1))


def total_sigma_z(n_sites: int) -> np.ndarray:
    return collective_lindblad(LindbladKind.SIGMA_Z, n_sites)


def basis_index(site: int, n_sites: int) -> int:
    """Index of the basis state with a single ``1`` bit at ``site``."""
    n = _check_n_sites(n_sites)
    if int(site) != site or not 1 <= site <= n:
        raise InvalidSiteError(f"site {site!r} outside 1..{n}")
    return 1 << (n - int(site))


def basis_state(site: int, n_sites: int) -> np.ndarray:
    """Single-excitation basis vector with the excitation at ``site``."""
    psi = np.zeros(2**n_sites, dtype=complex)
    psi[basis_index(site, n_sites)] = 1.0
    return psi
