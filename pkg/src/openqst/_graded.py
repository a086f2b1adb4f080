"""Sector-blocked operator algebra used to speed up propagation.

Basis states are labelled by excitation number (or its parity).  When the
Hamiltonian conserves the label and the bath operator shifts it by a fixed
amount, every operator in the dynamics maps one sector to one other sector,
so it can be stored as a dict of dense blocks and multiplied block by block.
Results are identical to the dense algebra up to rounding.
"""

from __future__ import annotations

import numpy as np


def _dag(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


class Grading:
    """Labels each basis state; ``modulus`` is None for plain integer labels."""

    def __init__(self, labels: np.ndarray, modulus: int | None):
        self.labels = np.asarray(labels, dtype=int)
        self.modulus = modulus
        self.sectors = sorted(set(self.labels.tolist()))
        self.members = {q: np.flatnonzero(self.labels == q) for q in self.sectors}
        self.position = np.empty(len(self.labels), dtype=int)
        for idx in self.members.values():
            self.position[idx] = np.arange(len(idx))

    def move(self, q: int, s: int) -> int | None:
        t = q + s
        if self.modulus is not None:
            return t % self.modulus
        return t if t in self.members else None

    def norm_shift(self, s: int) -> int:
        return s % self.modulus if self.modulus is not None else s

    def allowed(self, shift: int) -> np.ndarray:
        diff = self.labels[:, None] - self.labels[None, :]
        if self.modulus is not None:
            return diff % self.modulus == shift % self.modulus
        return diff == shift

    def covers(self, x: np.ndarray, shift: int) -> bool:
        """True when ``x`` has no weight outside the blocks of ``shift``."""
        mask = ~self.allowed(shift)
        return not np.any(np.asarray(x)[..., mask])

    def pack(self, x: np.ndarray, shift: int) -> "GradedOp":
        x = np.asarray(x, dtype=complex)
        blocks = {}
        for q in self.sectors:
            t = self.move(q, shift)
            if t is None:
                continue
            rows, cols = self.members[t], self.members[q]
            blocks[q] = np.ascontiguousarray(x[..., rows[:, None], cols[None, :]])
        return GradedOp(blocks, self.norm_shift(shift), self)

    def unpack(self, op: "GradedOp", batch_shape=()) -> np.ndarray:
        dim = len(self.labels)
        out = np.zeros(tuple(batch_shape) + (dim, dim), dtype=complex)
        for q, b in op.blocks.items():
            t = self.move(q, op.shift)
            out[..., self.members[t][:, None], self.members[q][None, :]] = b
        return out


def detect_grading(lindblad: np.ndarray, n_sites: int) -> tuple[Grading, int] | None:
    """Grading under which ``lindblad`` shifts every sector by one fixed amount."""
    counts = np.array([bin(b).count("1") for b in range(2**n_sites)])
    rows, cols = np.nonzero(np.abs(lindblad) > 0)
    deltas = np.unique(counts[rows] - counts[cols])
    if deltas.size <= 1:
        return Grading(counts, None), int(deltas[0]) if deltas.size else 0
    parities = np.unique(deltas % 2)
    if parities.size == 1:
        return Grading(counts % 2, 2), int(parities[0])
    return None


class GradedOp:
    """Block-sparse operator: ``blocks[q]`` maps sector q to sector q + shift."""

    __slots__ = ("blocks", "shift", "grading")
    __array_ufunc__ = None

    def __init__(self, blocks: dict, shift: int, grading: Grading):
        self.blocks = blocks
        self.shift = shift
        self.grading = grading

    def __matmul__(self, other: "GradedOp") -> "GradedOp":
        g = self.grading
        out = {}
        for q, xb in other.blocks.items():
            ab = self.blocks.get(g.move(q, other.shift))
            if ab is not None:
                out[q] = ab @ xb
        return GradedOp(out, g.norm_shift(self.shift + other.shift), g)

    def _combine(self, other: "GradedOp", sign: float) -> "GradedOp":
        if other.shift != self.shift:
            raise ValueError(f"cannot add shift {self.shift} and shift {other.shift} operators")
        out = dict(self.blocks)
        for q, b in other.blocks.items():
            if q in out:
                out[q] = out[q] + b if sign > 0 else out[q] - b
            else:
                out[q] = b if sign > 0 else -b
        return GradedOp(out, self.shift, self.grading)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return GradedOp({q: -b for q, b in self.blocks.items()}, self.shift, self.grading)

    def __mul__(self, scalar):
        return GradedOp({q: scalar * b for q, b in self.blocks.items()}, self.shift, self.grading)

    __rmul__ = __mul__

    def dag(self) -> "GradedOp":
        g = self.grading
        out = {g.move(q, self.shift): _dag(b) for q, b in self.blocks.items()}
        return GradedOp(out, g.norm_shift(-self.shift), g)


class GradedLayout:
    """Packs several graded operators into one flat buffer.

    RK4 linear combinations then act on a single array while the right-hand
    side sees per-sector views.
    """

    def __init__(self, grading: Grading, shifts: tuple[int, ...], batch: int):
        self.grading = grading
        self.shifts = tuple(grading.norm_shift(s) for s in shifts)
        self.batch = batch
        self.slots = []
        offset = 0
        for s in self.shifts:
            comp = []
            for q in grading.sectors:
                t = grading.move(q, s)
                if t is None:
                    continue
                shape = (batch, len(grading.members[t]), len(grading.members[q]))
                size = int(np.prod(shape))
                comp.append((q, offset, shape))
                offset += size
            self.slots.append(comp)
        self.size = offset

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size, dtype=complex)

    def view(self, flat: np.ndarray) -> tuple[GradedOp, ...]:
        ops = []
        for s, comp in zip(self.shifts, self.slots):
            blocks = {q: flat[o : o + int(np.prod(sh))].reshape(sh) for q, o, sh in comp}
            ops.append(GradedOp(blocks, s, self.grading))
        return tuple(ops)

    def flatten(self, ops) -> np.ndarray:
        flat = self.zeros()
        for op, comp in zip(ops, self.slots):
            for q, o, sh in comp:
                b = op.blocks.get(q)
                if b is not None:
                    flat[o : o + int(np.prod(sh))].reshape(sh)[...] = b
        return flat
