"""Simulation, optimization and sweep runs that write CSV results and a JSON manifest."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .control import LeoControl, NoControl, Passage
from .dynamics import Trajectory, propagate_lindblad, propagate_qsd
from .losses import CouplingLoss, PulseLoss
from .optimizer import OptimizationReport, optimize
from .spin_model import ChainSpec, collective_lindblad

log = logging.getLogger(__name__)

SIG_DIGITS = 12

AXES = {
    "Γ": "bath.gamma_coupling",
    "Gamma": "bath.gamma_coupling",
    "gamma_coupling": "bath.gamma_coupling",
    "γ": "bath.gamma_memory",
    "gamma": "bath.gamma_memory",
    "gamma_memory": "bath.gamma_memory",
    "T": "bath.temperature",
    "temperature": "bath.temperature",
    "L": "lindblad.kind",
    "lindblad": "lindblad.kind",
}


def fmt(x) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def resolve_axis(axis: str) -> str:
    try:
        return AXES[axis]
    except KeyError:
        raise ConfigError(f"unknown sweep axis {axis!r}; use one of {sorted(set(AXES))}") from None


@dataclass
class RunRecord:
    """What a run did and where its files went."""

    command: str
    config: dict[str, str]
    trajectory_csv: str
    f_max: float
    t_a: float
    duration_s: float
    report: dict | None = None
    files: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))

    @property
    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig().with_values(self.config)


def _prepare_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc.strerror or exc}") from exc
    return path


def _write_csv(path: Path, header: list[str], rows) -> None:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_trajectory(path: Path, traj: Trajectory) -> None:
    _write_csv(path, ["t", "fidelity"], ((fmt(t), fmt(f)) for t, f in zip(traj.times, traj.fidelities)))


def read_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _propagate(cfg: ExperimentConfig, spec: ChainSpec, shape) -> Trajectory:
    control = None
    if not isinstance(shape, NoControl):
        control = LeoControl(shape, Passage.for_chain(spec.n_sites))
    run = propagate_qsd if cfg.dynamics.model == "qsd" else propagate_lindblad
    return run(
        spec,
        collective_lindblad(cfg.lindblad_kind, spec.n_sites),
        cfg.bath_params,
        control=control,
        t_total=cfg.horizon.t_total,
        n_steps=cfg.horizon.n_steps,
    )


def _finish(cfg, command, out, label, traj, start, report=None, files=None) -> RunRecord:
    traj_path = out / f"{label}.trajectory.csv"
    write_trajectory(traj_path, traj)
    record = RunRecord(
        command=command,
        config=cfg.to_flat(),
        trajectory_csv=str(traj_path),
        f_max=traj.f_max,
        t_a=traj.t_a,
        duration_s=time.perf_counter() - start,
        report=report,
        files=files or {},
    )
    manifest = out / f"{label}.record.json"
    try:
        manifest.write_text(record.to_json())
    except OSError as exc:
        raise OSError(f"cannot write {manifest}: {exc.strerror or exc}") from exc
    return record


def _out_dir(cfg: ExperimentConfig, out) -> Path:
    return _prepare_dir(Path(out if out is not None else cfg.output.dir))


def cmd_simulate(cfg: ExperimentConfig, out=None, label: str | None = None) -> RunRecord:
    """Propagate the configured chain once and write its fidelity trajectory."""
    if cfg.optimizing:
        raise ConfigError("simulate does not take optimize flags; use the optimize command")
    start = time.perf_counter()
    out = _out_dir(cfg, out)
    traj = _propagate(cfg, cfg.chain_spec, cfg.pulse_shape())
    return _finish(cfg, "simulate", out, label or cfg.run.label, traj, start)


def cmd_optimize(cfg: ExperimentConfig, out=None, label: str | None = None, progress=None) -> RunRecord:
    """Optimize couplings or pulse amplitudes, then rerun the best point at full resolution."""
    target = cfg.optimizing
    if target is None:
        raise ConfigError("optimize needs chain.optimize = true or control.optimize = true")
    start = time.perf_counter()
    out = _out_dir(cfg, out)
    label = label or cfg.run.label
    adam = cfg.adam_config()
    setup = cfg.setup(n_steps=cfg.loss_steps)
    if target == "couplings":
        loss = CouplingLoss(setup, adam.penalty_weight)
        initial, bounds = cfg.initial_couplings(), cfg.coupling_bounds()
    else:
        loss = PulseLoss(setup, cfg.control.family, adam.penalty_weight, cfg.base_frequency)
        initial = cfg.initial_amplitudes()
        bounds = cfg.amplitude_bounds(initial.size)
    report = optimize(initial, loss, adam, bounds, callback=progress)

    loss_path = out / f"{label}.loss.csv"
    _write_csv(
        loss_path,
        ["iteration", "loss", "fidelity"],
        ((k, fmt(l), fmt(f)) for k, (l, f) in enumerate(zip(report.loss_history, report.fidelity_history))),
    )
    params_path = out / f"{label}.params.csv"
    _write_csv(params_path, ["index", "value"], ((i, repr(float(v))) for i, v in enumerate(report.best_params)))

    if target == "couplings":
        traj = _propagate(cfg, ChainSpec(cfg.chain.n_sites, report.best_params), cfg.pulse_shape())
    else:
        traj = _propagate(cfg, cfg.chain_spec, cfg.pulse_shape(report.best_params))
    files = {"loss_csv": str(loss_path), "params_csv": str(params_path)}
    return _finish(cfg, "optimize", out, label, traj, start, report.to_dict(), files)


def _value_tag(value: str) -> str:
    return str(value).strip().replace("/", "_").replace(" ", "")


def _sweep_job(args):
    text, key, value, out, label = args
    cfg = ExperimentConfig.from_text(text).with_values({key: value})
    run = cmd_optimize if cfg.optimizing else cmd_simulate
    return run(cfg, out, label)


def cmd_sweep(
    cfg: ExperimentConfig,
    axis: str,
    values,
    out=None,
    workers: int = 1,
    label: str | None = None,
) -> tuple[list[RunRecord], Path]:
    """One run per axis value plus a summary CSV ``axis_value,f_max,t_a``."""
    values = [str(v).strip() for v in values]
    if not values or any(not v for v in values):
        raise ConfigError("sweep needs a nonempty list of values")
    key = resolve_axis(axis)
    label = label or cfg.run.label
    out = _out_dir(cfg, out)
    for v in values:
        cfg.with_values({key: v})  # fail fast on bad values
    base = cfg.to_text()
    section_key = key.split(".")[1]
    jobs = [(base, key, v, str(out), f"{label}_{section_key}-{_value_tag(v)}") for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_sweep_job, jobs))
    else:
        records = [_sweep_job(j) for j in jobs]

    summary = out / f"{label}_sweep_{section_key}.csv"

    def axis_cell(v):
        try:
            return fmt(float(v))
        except ValueError:
            return v

    _write_csv(
        summary,
        ["axis_value", "f_max", "t_a"],
        ((axis_cell(v), fmt(r.f_max), fmt(r.t_a)) for v, r in zip(values, records)),
    )
    return records, summary


def parse_values(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def best_params(record: RunRecord) -> np.ndarray:
    return OptimizationReport.from_dict(record.report).best_params
