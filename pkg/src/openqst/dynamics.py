"""Open-system propagation of the chain's reduced density matrix.

The non-Markovian model evolves the triple ``(rho, O_z, O_w)``::

    d rho/dt = -i[H, rho] + [L, rho O_z^+] - [L^+, O_z rho]
               + [L^+, rho O_w^+] - [L, O_w rho]
    d O_z/dt = (G T g / 2 - i G g^2 / 2) L - g O_z + [-iH - (L^+ O_z + L O_w), O_z]
    d O_w/dt = (G T g / 2) L^+ - g O_w + [-iH - (L^+ O_z + L O_w), O_w]

with G the system-bath coupling, g the bath memory rate and T the temperature.
The Markovian propagator integrates the Lindblad equation with both dissipators
weighted by ``G T / 2``.  Everything is integrated with fixed-step RK4, batched
over a leading axis so that several Hamiltonians (or pulses) share one loop.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .control import T_TOTAL, LeoControl, Passage, PulseShape
from ._graded import GradedLayout, GradedOp, Grading, detect_grading
from .spin_model import ChainSpec, InvalidSiteError, basis_index, build_xy_hamiltonian

log = logging.getLogger(__name__)

DEFAULT_STEPS = 2000
MIN_STEPS = 100


class DivergenceError(FloatingPointError):
    """Non-finite values appeared during integration."""

    def __init__(self, step: int, time: float):
        super().__init__(f"integration diverged at step {step} (t={time:.6g})")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class BathParams:
    gamma_coupling: float
    gamma_memory: float
    temperature: float

    def __post_init__(self):
        if not self.gamma_coupling >= 0:
            raise ValueError(f"gamma_coupling must be >= 0, got {self.gamma_coupling}")
        if not (self.gamma_memory > 0 and np.isfinite(self.gamma_memory)):
            raise ValueError(f"gamma_memory must be positive and finite, got {self.gamma_memory}")
        if not self.temperature >= 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


@dataclass
class DynamicState:
    rho: np.ndarray
    o_z: np.ndarray
    o_w: np.ndarray
    time: float = 0.0


@dataclass
class Trajectory:
    times: np.ndarray
    fidelities: np.ndarray
    final_state: DynamicState
    trace_error: np.ndarray = field(repr=False, default=None)
    hermiticity_error: np.ndarray = field(repr=False, default=None)
    states: list[np.ndarray] | None = field(repr=False, default=None)

    @property
    def f_max(self) -> float:
        return max_fidelity_and_arrival(self)[0]

    @property
    def t_a(self) -> float:
        return max_fidelity_and_arrival(self)[1]


def _dag(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def _adjoint(x):
    return x.dag() if isinstance(x, GradedOp) else _dag(x)


class _QsdKernel:
    """Right-hand side of the non-Markovian model on ``(rho, O_z, O_w)``.

    Uses ``(O rho)^+ = rho O^+`` for Hermitian rho, which folds the four bath
    commutators into ``C + C^+`` with ``C = [L, rho O_z^+ - O_w rho]``.
    Operands are dense arrays or sector-blocked operators alike.
    """

    n_components = 3

    def __init__(self, lind, lind_dag, bath: BathParams):
        g, big_g, temp = bath.gamma_memory, bath.gamma_coupling, bath.temperature
        self.lind = lind
        self.lind_dag = lind_dag
        self.gamma = g
        self.drive_z = (big_g * temp * g / 2 - 0.5j * big_g * g * g) * lind
        self.drive_w = (big_g * temp * g / 2) * lind_dag

    def __call__(self, rho, o_z, o_w, h):
        lind, lind_dag = self.lind, self.lind_dag
        d = _adjoint(o_z @ rho) - o_w @ rho
        e = (lind @ d - d @ lind) - 1j * (h @ rho)
        a = -1j * h - (lind_dag @ o_z + lind @ o_w)
        d_oz = (a @ o_z - o_z @ a) - self.gamma * o_z + self.drive_z
        d_ow = (a @ o_w - o_w @ a) - self.gamma * o_w + self.drive_w
        return e + _adjoint(e), d_oz, d_ow


class _LindbladKernel:
    n_components = 1

    def __init__(self, lind, lind_dag, rate: float):
        self.lind = lind
        self.lind_dag = lind_dag
        self.rate = rate
        self.anti = lind_dag @ lind + lind @ lind_dag

    def __call__(self, rho, h):
        e = -1j * (h @ rho)
        if not self.rate:
            return (e + _adjoint(e),)
        e = e - self.rate * (self.anti @ rho)
        f = self.rate * ((self.lind @ rho) @ self.lind_dag + (self.lind_dag @ rho) @ self.lind)
        return (e + _adjoint(e) + f + _adjoint(f),)


class _DenseRep:
    """Plain ``(n_components, B, d, d)`` arrays."""

    def __init__(self, n_components: int, batch: int, dim: int):
        self.shape = (n_components, batch, dim, dim)

    def op(self, x, shift=0):
        return np.asarray(x, dtype=complex)

    def zeros(self):
        return np.zeros(self.shape, dtype=complex)

    def view(self, y):
        return tuple(y)

    def flatten(self, parts):
        return np.stack(np.broadcast_arrays(*parts))

    def set_population(self, y, index, value):
        y[0, :, index, index] = value

    def population(self, y, index):
        return y[0, :, index, index].real

    def trace(self, y):
        return np.trace(y[0], axis1=1, axis2=2)

    def hermiticity(self, y):
        return np.abs(y[0] - _dag(y[0])).max(axis=(1, 2))

    def dense(self, y):
        return y


class _GradedRep:
    def __init__(self, grading: Grading, shifts: tuple[int, ...], batch: int):
        self.grading = grading
        self.layout = GradedLayout(grading, shifts, batch)
        self.batch = batch
        self.rho_slots = {q: (o, sh) for q, o, sh in self.layout.slots[0]}

    def op(self, x, shift=0):
        return self.grading.pack(x, shift)

    def zeros(self):
        return self.layout.zeros()

    def view(self, y):
        return self.layout.view(y)

    def flatten(self, parts):
        return self.layout.flatten(parts)

    def _rho_block(self, y, q):
        o, sh = self.rho_slots[q]
        return y[o : o + int(np.prod(sh))].reshape(sh)

    def set_population(self, y, index, value):
        q, p = self.grading.labels[index], self.grading.position[index]
        self._rho_block(y, q)[:, p, p] = value

    def population(self, y, index):
        q, p = self.grading.labels[index], self.grading.position[index]
        return self._rho_block(y, q)[:, p, p].real

    def trace(self, y):
        return sum(np.trace(self._rho_block(y, q), axis1=1, axis2=2) for q in self.rho_slots)

    def hermiticity(self, y):
        defects = [np.abs(b - _dag(b)).max(axis=(1, 2)) for b in (self._rho_block(y, q) for q in self.rho_slots)]
        return np.max(defects, axis=0)

    def dense(self, y):
        return np.stack([self.grading.unpack(op, (self.batch,)) for op in self.view(y)])


@dataclass
class BatchResult:
    times: np.ndarray
    fidelities: np.ndarray
    final: np.ndarray
    diverged_at: np.ndarray
    trace_error: np.ndarray | None = None
    hermiticity_error: np.ndarray | None = None
    states: list[np.ndarray] | None = None


def _validate_steps(t_total: float, n_steps: int):
    if not t_total > 0:
        raise ValueError(f"t_total must be positive, got {t_total}")
    if int(n_steps) != n_steps or n_steps < MIN_STEPS:
        raise ValueError(f"n_steps must be an integer >= {MIN_STEPS}, got {n_steps}")


GRADED_MIN_DIM = 32


def _choose_rep(representation, h0, lindblad, passage, n_sites, n_components):
    batch, dim = h0.shape[0], h0.shape[-1]
    if representation == "dense" or (representation == "auto" and dim < GRADED_MIN_DIM):
        return _DenseRep(n_components, batch, dim), 0
    if representation not in ("auto", "graded"):
        raise ValueError(f"unknown representation {representation!r}")
    found = detect_grading(lindblad, n_sites)
    ok = found is not None and found[0].covers(h0, 0)
    if ok and passage is not None:
        ok = found[0].covers(build_xy_hamiltonian(passage.spec), 0)
    if not ok:
        if representation == "graded":
            raise ValueError("operators do not admit a sector grading")
        return _DenseRep(n_components, batch, dim), 0
    grading, delta = found
    shifts = (0, delta, -delta)[:n_components]
    return _GradedRep(grading, shifts, batch), delta


def evolve_batch(
    hamiltonians: np.ndarray,
    lindblad: np.ndarray,
    bath: BathParams | None,
    *,
    n_sites: int,
    model: str = "qsd",
    t_total: float = T_TOTAL,
    n_steps: int = DEFAULT_STEPS,
    pulses: Sequence[PulseShape] | None = None,
    passage: Passage | None = None,
    source_site: int = 1,
    target_site: int | None = None,
    monitor: bool = False,
    keep_states: bool = False,
    representation: str = "auto",
) -> BatchResult:
    """Integrate B systems in lockstep from ``rho = |source><source|``.

    ``model`` is ``"qsd"`` (non-Markovian), ``"lindblad"`` (memoryless limit)
    or ``"closed"``.  ``hamiltonians`` has shape (B, d, d).  With ``pulses``
    (one per system) the Hamiltonian at time t is
    ``H_b + c_b(t) |Psi(t)><Psi(t)|``, evaluated at the RK4 substage times.
    A system whose populations turn non-finite is recorded in ``diverged_at``
    and carried along as NaN.
    """
    _validate_steps(t_total, n_steps)
    h0 = np.asarray(hamiltonians, dtype=complex)
    if h0.ndim == 2:
        h0 = h0[None]
    batch, dim = h0.shape[0], h0.shape[-1]
    if dim != 2**n_sites:
        raise ValueError(f"Hamiltonian dimension {dim} does not match {n_sites} sites")
    lindblad = np.asarray(lindblad, dtype=complex)
    if lindblad.shape != (dim, dim):
        raise ValueError(f"Lindblad operator shape {lindblad.shape} does not match dimension {dim}")
    target_site = n_sites if target_site is None else target_site
    src = basis_index(source_site, n_sites)
    tgt = basis_index(target_site, n_sites)

    dt = t_total / n_steps
    times = np.arange(n_steps + 1) * dt
    coeffs = None
    if pulses is not None:
        if passage is None:
            raise ValueError("pulses need a passage")
        if len(pulses) != batch:
            raise ValueError(f"{len(pulses)} pulses for a batch of {batch}")
        half_grid = np.arange(2 * n_steps + 1) * (dt / 2)
        coeffs = np.stack([np.asarray(p.values(half_grid), dtype=float) for p in pulses])
        if not coeffs.any():
            coeffs = passage = None

    if model == "qsd" and bath.gamma_coupling == 0:
        # both drives vanish, so O_z and O_w stay at their zero start
        model = "closed"
    n_comp = 3 if model == "qsd" else 1
    rep, delta = _choose_rep(representation, h0, lindblad, passage, n_sites, n_comp)
    lind, lind_dag = rep.op(lindblad, delta), rep.op(_dag(lindblad), -delta)
    if model == "qsd":
        kernel = _QsdKernel(lind, lind_dag, bath)
    elif model == "lindblad":
        kernel = _LindbladKernel(lind, lind_dag, bath.gamma_coupling * bath.temperature / 2)
    elif model == "closed":
        kernel = _LindbladKernel(lind, lind_dag, 0.0)
    else:
        raise ValueError(f"unknown model {model!r}")
    h_static = rep.op(h0, 0)

    def hamiltonian(j: int):
        if coeffs is None:
            return h_static
        proj = rep.op(passage.projector(j * dt / 2), 0)
        return h_static + coeffs[:, j, None, None] * proj

    def deriv(y, h):
        return rep.flatten(kernel(*rep.view(y), h))

    y = rep.zeros()
    rep.set_population(y, src, 1.0)

    fids = np.full((batch, n_steps + 1), np.nan)
    diverged = np.full(batch, -1)
    trace_err = herm_err = None
    if monitor:
        trace_err = np.full((batch, n_steps + 1), np.nan)
        herm_err = np.full((batch, n_steps + 1), np.nan)
    states = [] if keep_states else None

    def record(k: int):
        pops = rep.population(y, tgt)
        bad = ~np.isfinite(pops) & (diverged < 0)
        diverged[bad] = k
        fids[:, k] = np.sqrt(np.clip(pops, 0.0, 1.0))
        if monitor:
            trace_err[:, k] = np.abs(rep.trace(y) - 1.0)
            herm_err[:, k] = rep.hermiticity(y)
        if keep_states:
            states.append(rep.dense(y)[0].copy())

    half = dt / 2
    with np.errstate(all="ignore"):
        record(0)
        h_now = hamiltonian(0)
        for k in range(n_steps):
            h_mid = hamiltonian(2 * k + 1)
            h_next = hamiltonian(2 * k + 2)
            k1 = deriv(y, h_now)
            k2 = deriv(y + half * k1, h_mid)
            k3 = deriv(y + half * k2, h_mid)
            k4 = deriv(y + dt * k3, h_next)
            y = y + (dt / 6) * (k1 + 2 * (k2 + k3) + k4)
            h_now = h_next
            record(k + 1)
            if (diverged >= 0).all():
                break
    fids[diverged >= 0] = np.nan
    return BatchResult(times, fids, rep.dense(y), diverged, trace_err, herm_err, states)


def _hamiltonian_at(hamiltonian, t: float) -> np.ndarray:
    return np.asarray(hamiltonian(t) if callable(hamiltonian) else hamiltonian, dtype=complex)


def qsd_rhs(
    state: DynamicState,
    hamiltonian: np.ndarray | Callable[[float], np.ndarray],
    lindblad: np.ndarray,
    bath: BathParams,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivative ``(d rho, d O_z, d O_w)`` of the non-Markovian model."""
    h = _hamiltonian_at(hamiltonian, state.time)
    mats = [np.asarray(m, dtype=complex) for m in (state.rho, state.o_z, state.o_w, h, lindblad)]
    shapes = {m.shape for m in mats}
    if len(shapes) != 1 or mats[0].ndim != 2 or mats[0].shape[0] != mats[0].shape[1]:
        raise ValueError(f"all operators must be square and of one shape, got {sorted(shapes)}")
    rho, o_z, o_w, h, lind = mats
    return _QsdKernel(lind, _dag(lind), bath)(rho, o_z, o_w, h)


def lindblad_rhs(
    rho: np.ndarray,
    hamiltonian: np.ndarray,
    lindblad: np.ndarray,
    bath: BathParams,
) -> np.ndarray:
    """Time derivative of rho in the Markovian (memoryless) limit."""
    lind = np.asarray(lindblad, dtype=complex)
    kernel = _LindbladKernel(lind, _dag(lind), bath.gamma_coupling * bath.temperature / 2)
    return kernel(np.asarray(rho, dtype=complex), np.asarray(hamiltonian, dtype=complex))[0]


def _run_single(
    spec: ChainSpec,
    lindblad: np.ndarray,
    bath: BathParams | None,
    model: str,
    control: LeoControl | None,
    t_total: float,
    n_steps: int,
    store_states: bool,
    representation: str = "auto",
) -> Trajectory:
    pulses = passage = None
    if control is not None:
        pulses, passage = [control.shape], control.passage
    res = evolve_batch(
        build_xy_hamiltonian(spec)[None],
        lindblad,
        bath,
        n_sites=spec.n_sites,
        model=model,
        t_total=t_total,
        n_steps=n_steps,
        pulses=pulses,
        passage=passage,
        monitor=True,
        keep_states=store_states,
        representation=representation,
    )
    if res.diverged_at[0] >= 0:
        step = int(res.diverged_at[0])
        raise DivergenceError(step, step * t_total / n_steps)
    final = res.final[:, 0]
    if final.shape[0] == 3:
        state = DynamicState(final[0], final[1], final[2], t_total)
    else:
        zero = np.zeros_like(final[0])
        state = DynamicState(final[0], zero, zero.copy(), t_total)
    snapshots = [s[0] for s in res.states] if store_states else None
    return Trajectory(res.times, res.fidelities[0], state, res.trace_error[0], res.hermiticity_error[0], snapshots)


def propagate_qsd(
    spec: ChainSpec,
    lindblad: np.ndarray,
    bath: BathParams,
    control: LeoControl | None = None,
    t_total: float = T_TOTAL,
    n_steps: int = DEFAULT_STEPS,
    store_states: bool = False,
    representation: str = "auto",
) -> Trajectory:
    """Non-Markovian evolution from ``|1><1|`` with ``O_z(0) = O_w(0) = 0``.

    Raises
    ------
    DivergenceError
        If the populations become non-finite; the error names the step.
    """
    return _run_single(spec, lindblad, bath, "qsd", control, t_total, n_steps, store_states, representation)


def propagate_lindblad(
    spec: ChainSpec,
    lindblad: np.ndarray,
    bath: BathParams,
    control: LeoControl | None = None,
    t_total: float = T_TOTAL,
    n_steps: int = DEFAULT_STEPS,
    store_states: bool = False,
    representation: str = "auto",
) -> Trajectory:
    """Markovian evolution; ``bath.gamma_memory`` is ignored."""
    return _run_single(spec, lindblad, bath, "lindblad", control, t_total, n_steps, store_states, representation)


def propagate_closed(
    spec: ChainSpec,
    control: LeoControl | None = None,
    t_total: float = T_TOTAL,
    n_steps: int = DEFAULT_STEPS,
    store_states: bool = False,
) -> Trajectory:
    """Unitary evolution of the isolated chain."""
    zero = np.zeros((spec.dim, spec.dim), dtype=complex)
    return _run_single(spec, zero, None, "closed", control, t_total, n_steps, store_states)


def fidelity(rho: np.ndarray, target_index: int) -> float:
    """``sqrt(<target|rho|target>)`` for the excitation sitting at ``target_index``."""
    rho = np.asarray(rho)
    n_sites = int(round(np.log2(rho.shape[0])))
    if 2**n_sites != rho.shape[0]:
        raise ValueError(f"dimension {rho.shape[0]} is not a power of two")
    if int(target_index) != target_index or not 1 <= target_index <= n_sites:
        raise InvalidSiteError(f"target {target_index!r} outside 1..{n_sites}")
    k = basis_index(target_index, n_sites)
    return float(np.sqrt(np.clip(rho[k, k].real, 0.0, 1.0)))


def max_fidelity_and_arrival(traj: Trajectory) -> tuple[float, float]:
    """Largest sampled fidelity and the earliest time it is reached."""
    fids = np.asarray(traj.fidelities)
    if fids.size == 0:
        raise ValueError("empty trajectory")
    k = int(np.argmax(fids))
    return float(fids[k]), float(traj.times[k])
