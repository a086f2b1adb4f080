"""Command-line entry point: ``openqst simulate|optimize|sweep|preset``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .presets import PRESETS, get_preset
from .runner import RunRecord, cmd_optimize, cmd_simulate, cmd_sweep, fmt, parse_values

log = logging.getLogger("openqst")


def _overrides(pairs) -> dict[str, str]:
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        out[key.strip()] = value.strip()
    return out


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    return cfg.with_values(_overrides(args.set)) if args.set else cfg


def _print_record(rec: RunRecord, prefix: str = "") -> None:
    print(f"{prefix}f_max={fmt(rec.f_max)} t_a={fmt(rec.t_a)} -> {rec.trajectory_csv}")


def _progress(every: int):
    def report(k, x, loss, fid):
        if k % every == 0:
            log.info("iteration %d loss %s fidelity %s", k, fmt(loss), fmt(fid))

    return report


def run_simulate(args) -> None:
    _print_record(cmd_simulate(_load(args), args.out))


def run_optimize(args) -> None:
    rec = cmd_optimize(_load(args), args.out, progress=_progress(args.log_every))
    _print_record(rec)
    print(f"best parameters -> {rec.files['params_csv']}")


def run_sweep(args) -> None:
    records, summary = cmd_sweep(_load(args), args.axis, parse_values(args.values), args.out, args.workers)
    for rec in records:
        _print_record(rec, "  ")
    print(f"summary -> {summary}")


def run_preset(args) -> None:
    preset = get_preset(args.name)
    cfg = preset.config(full=args.full, overrides=_overrides(args.set))
    for tag, variant in preset.variants:
        vcfg = cfg.with_values(variant)
        label = f"{preset.name}_{tag}"
        print(f"{label}: sweeping {preset.axis} over {', '.join(preset.values)}")
        if args.dry_run:
            continue
        records, summary = cmd_sweep(vcfg, preset.axis, preset.values, args.out, args.workers, label)
        for rec in records:
            _print_record(rec, "  ")
        print(f"  summary -> {summary}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openqst", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log optimizer progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", type=Path, help="key = value configuration file")
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        return p

    p = common(sub.add_parser("simulate", help="propagate one configuration"))
    p.set_defaults(func=run_simulate)

    p = common(sub.add_parser("optimize", help="optimize couplings or pulses"))
    p.add_argument("--log-every", type=int, default=20, help="progress interval in iterations")
    p.set_defaults(func=run_optimize)

    p = common(sub.add_parser("sweep", help="rerun a configuration along one bath axis"))
    p.add_argument("--axis", required=True, help="Γ|γ|T (or Gamma, gamma, T, lindblad)")
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=run_sweep)

    p = common(sub.add_parser("preset", help=f"run a built-in set: {', '.join(PRESETS)}"), config=False)
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--full", action="store_true", help="use the full 1000-iteration budget")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dry-run", action="store_true", help="list the runs without executing them")
    p.set_defaults(func=run_preset)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (ConfigError, OSError, KeyError, FloatingPointError, RuntimeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"openqst: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
