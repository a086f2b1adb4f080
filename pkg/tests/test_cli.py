import json
import math
import subprocess
import sys

import numpy as np
import pytest

from openqst.cli import main
from openqst.config import ExperimentConfig
from openqst.runner import RunRecord, cmd_optimize, cmd_simulate, cmd_sweep, read_csv

FIG3 = """
chain.n_sites = 4
bath.gamma_coupling = 0.1
bath.gamma_memory = 10
bath.temperature = 10
"""

FIG1 = """
chain.n_sites = 6
bath.gamma_coupling = 0.1
bath.gamma_memory = 2
bath.temperature = 10
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def floats(rows, key):
    return np.array([float(r[key]) for r in rows])


def test_simulate_closed_pst(tmp_path, capsys):
    cfg = write_cfg(tmp_path, FIG1.replace("gamma_coupling = 0.1", "gamma_coupling = 0"))
    assert main(["simulate", str(cfg), "--out", str(tmp_path / "o")]) == 0
    record = RunRecord.from_json((tmp_path / "o" / "run.record.json").read_text())
    assert record.f_max >= 0.9999
    assert abs(record.t_a - math.pi / 4) <= math.pi / 4 / 2000
    rows = read_csv(record.trajectory_csv)
    assert list(rows[0]) == ["t", "fidelity"]
    assert len(rows) == 2001
    assert "f_max=" in capsys.readouterr().out


def test_simulate_fig3_baselines(tmp_path):
    bare = cmd_simulate(ExperimentConfig.from_text(FIG3), tmp_path, "bare")
    ideal = cmd_simulate(ExperimentConfig.from_text(FIG3 + "control.family = ideal\n"), tmp_path, "ideal")
    assert bare.f_max == pytest.approx(0.585, abs=0.03)
    assert ideal.f_max == pytest.approx(0.958, abs=0.02)


def test_optimize_zero_budget_echoes_initial(tmp_path):
    cfg = ExperimentConfig.from_text(FIG3 + "chain.optimize = true\noptimizer.max_iterations = 0\n")
    rec = cmd_optimize(cfg, tmp_path)
    assert rec.report["termination"] == "max_iterations"
    # N=4 PST couplings sit outside the default box and get clamped into it
    np.testing.assert_allclose(rec.report["best_params"], [-2.0, -2.0, -2.0])
    params = read_csv(rec.files["params_csv"])
    assert [float(r["value"]) for r in params] == rec.report["best_params"]
    assert list(read_csv(rec.files["loss_csv"])[0]) == ["iteration", "loss", "fidelity"]


def test_optimize_couplings_beats_pst_quickly(tmp_path):
    base = ExperimentConfig.from_text(FIG1 + "horizon.n_steps = 400\n")
    baseline = cmd_simulate(base, tmp_path, "pst")
    cfg = base.with_values({"chain.optimize": "true", "optimizer.max_iterations": "5"})
    rec = cmd_optimize(cfg, tmp_path, "opt")
    assert rec.f_max > baseline.f_max
    losses = floats(read_csv(rec.files["loss_csv"]), "loss")
    assert len(losses) == 6 and losses[-1] < losses[0]


def test_sweep_gamma_coupling_decreasing(tmp_path):
    cfg = ExperimentConfig.from_text(FIG1 + "horizon.n_steps = 400\n")
    records, summary = cmd_sweep(cfg, "Γ", ["0", "0.05", "0.1"], tmp_path)
    rows = read_csv(summary)
    assert list(rows[0]) == ["axis_value", "f_max", "t_a"]
    np.testing.assert_array_equal(floats(rows, "axis_value"), [0, 0.05, 0.1])
    assert np.all(np.diff(floats(rows, "f_max")) < 0)
    assert len(records) == 3


def test_sweep_gamma_memory(tmp_path):
    cfg = ExperimentConfig.from_text(FIG1 + "horizon.n_steps = 400\n")
    _, summary = cmd_sweep(cfg, "γ", ["2", "5"], tmp_path)
    f = floats(read_csv(summary), "f_max")
    assert f[1] < f[0]


def test_single_value_sweep_matches_simulate(tmp_path):
    cfg = ExperimentConfig.from_text(FIG3 + "horizon.n_steps = 300\n")
    sim = cmd_simulate(cfg.with_values({"bath.temperature": "5"}), tmp_path / "a")
    (swept,), summary = cmd_sweep(cfg, "T", ["5"], tmp_path / "b")
    assert open(sim.trajectory_csv).read() == open(swept.trajectory_csv).read()
    row = read_csv(summary)[0]
    assert float(row["f_max"]) == pytest.approx(sim.f_max, rel=1e-11)


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = ExperimentConfig.from_text(FIG3 + "horizon.n_steps = 200\n")
    _, serial = cmd_sweep(cfg, "T", ["5", "10"], tmp_path / "s", workers=1)
    _, parallel = cmd_sweep(cfg, "T", ["5", "10"], tmp_path / "p", workers=2)
    assert serial.read_text() == parallel.read_text()


def test_rerun_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, FIG3 + "control.family = ideal\nhorizon.n_steps = 300\n")
    for d in ("x", "y"):
        assert main(["simulate", str(cfg), "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "x" / "run.trajectory.csv").read_bytes()
    b = (tmp_path / "y" / "run.trajectory.csv").read_bytes()
    assert a == b


def test_record_round_trip(tmp_path):
    cfg = ExperimentConfig.from_text(FIG3 + "control.family = fourier\ncontrol.optimize = true\n"
                                     "optimizer.max_iterations = 1\noptimizer.n_steps = 100\nhorizon.n_steps = 100\n")
    rec = cmd_optimize(cfg, tmp_path)
    text = rec.to_json()
    back = RunRecord.from_json(text)
    assert back == rec
    assert back.to_json() == text
    assert back.experiment == cfg
    on_disk = json.loads((tmp_path / "run.record.json").read_text())
    assert RunRecord.from_dict(on_disk) == rec


def test_sweep_requires_values(tmp_path):
    cfg = write_cfg(tmp_path, FIG3)
    assert main(["sweep", str(cfg), "--axis", "T", "--values", ",", "--out", str(tmp_path)]) == 1
    assert main(["sweep", str(cfg), "--axis", "N", "--values", "1", "--out", str(tmp_path)]) == 1


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "missing.cfg")]) == 1
    assert "missing.cfg" in capsys.readouterr().err
    cfg = write_cfg(tmp_path, FIG3)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["simulate", str(cfg), "--out", str(blocker / "sub")]) == 1
    assert "output directory" in capsys.readouterr().err
    assert main(["optimize", str(cfg), "--out", str(tmp_path)]) == 1
    assert main(["simulate", str(cfg), "--set", "chain.n_sites=x"]) == 1


def test_preset_dry_run_and_tiny_run(tmp_path, capsys):
    assert main(["preset", "fig1b", "--dry-run"]) == 0
    assert "gamma" in capsys.readouterr().out
    args = ["preset", "fig5b", "--out", str(tmp_path), "--set", "horizon.n_steps=100",
            "--set", "optimizer.n_steps=100", "--set", "optimizer.max_iterations=0"]
    assert main(args) == 0
    rows = read_csv(tmp_path / "fig5b_combinatorial_sweep_kind.csv")
    assert [r["axis_value"] for r in rows] == ["sigma_x", "lowering"]


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, FIG3 + "horizon.n_steps = 100\n")
    proc = subprocess.run(
        [sys.executable, "-m", "openqst", "simulate", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "f_max=" in proc.stdout
