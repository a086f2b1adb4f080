"""Adam with central finite-difference gradients and box constraints."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamConfig:
    alpha: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    loss_ceiling: float = 1e-3
    max_iterations: int = 1000
    penalty_weight: float = 0.01
    fd_step: float = 1e-3

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.loss_ceiling > 0:
            raise ValueError("loss_ceiling must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not self.penalty_weight >= 0:
            raise ValueError("penalty_weight must be >= 0")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


@dataclass(frozen=True)
class AdamState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    iteration: int = 0

    @classmethod
    def fresh(cls, params) -> "AdamState":
        params = np.array(params, dtype=float)
        return cls(params, np.zeros_like(params), np.zeros_like(params), 0)


@dataclass(frozen=True)
class ParamBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape:
            raise ValueError("lower and upper bounds differ in length")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform(cls, lower: float, upper: float, size: int) -> "ParamBounds":
        return cls(np.full(size, lower), np.full(size, upper))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


class Termination(str, enum.Enum):
    LOSS_CEILING = "loss_ceiling"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class OptimizationReport:
    best_params: np.ndarray
    best_loss: float
    best_fidelity: float
    loss_history: list[float]
    termination: Termination
    fidelity_history: list[float] = field(default_factory=list)
    best_iteration: int = 0

    @property
    def iterations(self) -> int:
        return len(self.loss_history)

    def to_dict(self) -> dict:
        return {
            "best_params": [float(x) for x in self.best_params],
            "best_loss": float(self.best_loss),
            "best_fidelity": float(self.best_fidelity),
            "loss_history": [float(x) for x in self.loss_history],
            "fidelity_history": [float(x) for x in self.fidelity_history],
            "termination": self.termination.value,
            "best_iteration": int(self.best_iteration),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationReport":
        return cls(
            best_params=np.asarray(d["best_params"], dtype=float),
            best_loss=d["best_loss"],
            best_fidelity=d["best_fidelity"],
            loss_history=list(d["loss_history"]),
            termination=Termination(d["termination"]),
            fidelity_history=list(d.get("fidelity_history", [])),
            best_iteration=d.get("best_iteration", 0),
        )


class GradientError(FloatingPointError):
    def __init__(self, coordinate: int, value: float):
        super().__init__(f"loss is not finite at probe of coordinate {coordinate} (got {value})")
        self.coordinate = coordinate


class OptimizationAborted(RuntimeError):
    """Raised when the loss diverges mid-run; carries the history so far."""

    def __init__(self, message: str, loss_history: list[float], params: np.ndarray):
        super().__init__(message)
        self.loss_history = loss_history
        self.params = params


def _split(result) -> tuple[float, float]:
    if isinstance(result, tuple):
        return float(result[0]), float(result[1])
    return float(result), float("nan")


def _evaluate_many(loss_fn, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Losses and fidelities at each row of ``points``.

    Objectives exposing ``batch(points) -> (losses, fidelities)`` are
    evaluated in one call; plain callables one point at a time.
    """
    batch = getattr(loss_fn, "batch", None)
    if batch is not None:
        losses, fids = batch(points)
        return np.asarray(losses, dtype=float), np.asarray(fids, dtype=float)
    pairs = [_split(loss_fn(p)) for p in points]
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def _probe_points(params: np.ndarray, h, bounds: ParamBounds | None):
    n = params.size
    h = np.broadcast_to(np.asarray(h, dtype=float), (n,))
    if np.any(h <= 0):
        raise ValueError("finite-difference step must be positive")
    eye = np.diag(h)
    plus = params + eye
    minus = params - eye
    if bounds is not None:
        plus = bounds.clip(plus)
        minus = bounds.clip(minus)
    return plus, minus


def _gradient_from(plus, minus, f_plus, f_minus) -> np.ndarray:
    n = plus.shape[0]
    for i in range(n):
        for val in (f_plus[i], f_minus[i]):
            if not np.isfinite(val):
                raise GradientError(i, val)
    spacing = np.diagonal(plus) - np.diagonal(minus)
    grad = np.zeros(n)
    ok = spacing > 0
    grad[ok] = (f_plus[ok] - f_minus[ok]) / spacing[ok]
    return grad


def finite_diff_gradient(
    loss_fn: Callable[[np.ndarray], float],
    params,
    h,
    bounds: ParamBounds | None = None,
) -> np.ndarray:
    """Central-difference gradient.

    ``h`` may be a scalar or one step per coordinate.  With ``bounds`` the probe
    points are clipped into the box and the difference quotient uses the
    actual probe spacing, so a coordinate pinned at a bound gets a one-sided
    estimate.  Coordinates whose box has zero width get a zero derivative.
    """
    params = np.asarray(params, dtype=float)
    plus, minus = _probe_points(params, h, bounds)
    losses, _ = _evaluate_many(loss_fn, np.vstack([plus, minus]))
    n = params.size
    return _gradient_from(plus, minus, losses[:n], losses[n:])


def adam_step(
    state: AdamState,
    gradient,
    config: AdamConfig,
    bounds: ParamBounds | None = None,
) -> AdamState:
    """One Adam update; returns a new state and leaves ``state`` untouched."""
    g = np.asarray(gradient, dtype=float)
    if g.shape != state.params.shape:
        raise ValueError(f"gradient shape {g.shape} does not match params {state.params.shape}")
    k = state.iteration + 1
    m = config.beta1 * state.m + (1 - config.beta1) * g
    v = config.beta2 * state.v + (1 - config.beta2) * g * g
    m_hat = m / (1 - config.beta1**k)
    v_hat = v / (1 - config.beta2**k)
    params = state.params - config.alpha * m_hat / (np.sqrt(v_hat) + config.epsilon)
    if bounds is not None:
        params = bounds.clip(params)
    return AdamState(params, m, v, k)


def relative_steps(params: np.ndarray, fd_step: float) -> np.ndarray:
    return fd_step * np.maximum(1.0, np.abs(params))


def optimize(
    initial,
    loss_fn,
    config: AdamConfig,
    bounds: ParamBounds | None = None,
    callback: Callable[[int, np.ndarray, float, float], None] | None = None,
) -> OptimizationReport:
    """Minimise ``loss_fn`` with Adam until ``loss < loss_ceiling`` or the budget runs out.

    ``loss_fn(params)`` returns a loss or a ``(loss, fidelity)`` pair; an
    optional ``batch`` attribute lets the current point and all probe points
    of an iteration be evaluated together.  The finite-difference step for
    coordinate i is ``fd_step * max(1, |x_i|)``.  The returned parameters are
    the best ever evaluated, earliest first on ties.
    """
    state = AdamState.fresh(initial)
    if bounds is not None:
        state = replace(state, params=bounds.clip(state.params))
    n = state.params.size
    losses: list[float] = []
    fids: list[float] = []
    best = (np.inf, state.params.copy(), np.nan, 0)

    while True:
        x = state.params
        plus, minus = _probe_points(x, relative_steps(x, config.fd_step), bounds)
        need_gradient = state.iteration < config.max_iterations
        points = np.vstack([x[None], plus, minus]) if need_gradient else x[None]
        vals, fvals = _evaluate_many(loss_fn, points)
        loss, fid = float(vals[0]), float(fvals[0])
        if not np.isfinite(loss):
            raise OptimizationAborted(f"loss diverged at iteration {state.iteration}", losses, x.copy())
        losses.append(loss)
        fids.append(fid)
        if loss < best[0]:
            best = (loss, x.copy(), fid, state.iteration)
        if callback is not None:
            callback(state.iteration, x, loss, fid)
        log.debug("iteration %d loss %.6g fidelity %.6g", state.iteration, loss, fid)
        if loss < config.loss_ceiling:
            termination = Termination.LOSS_CEILING
            break
        if not need_gradient:
            termination = Termination.MAX_ITERATIONS
            break
        try:
            grad = _gradient_from(plus, minus, vals[1 : n + 1], vals[n + 1 :])
        except GradientError as exc:
            raise OptimizationAborted(str(exc), losses, x.copy()) from exc
        state = adam_step(state, grad, config, bounds)

    return OptimizationReport(
        best_params=best[1],
        best_loss=best[0],
        best_fidelity=best[2],
        loss_history=losses,
        termination=termination,
        fidelity_history=fids,
        best_iteration=best[3],
    )
