"""CLI tests: config resolution, the three subcommands, reproducibility."""

import json
import math
import os
import shutil
import subprocess

import numpy as np
import pytest

from bathtag import qcore
from bathtag.cli import (ConfigError, build_initial_state, main,
                         resolve_config, run_curves, run_steady, run_validate)
from bathtag.lindblad import (Hypothesis, ModelParams, kappa_critical,
                              steady_report)


def resolve(raw, mode="steady"):
    return resolve_config(raw, mode)


# ---------------------------------------------------------------------------
# config resolution
# ---------------------------------------------------------------------------

def test_defaults():
    cfg = resolve({})
    assert cfg["mode"] == "steady"
    assert cfg["gamma"] == 1.0 and cfg["omega0"] == 0.0
    assert cfg["beta_omega_B"] == cfg["beta_omega_F"] == pytest.approx(math.log(2))
    assert cfg["scheme"] == "homodyne" and cfg["coupling"] == "sigma_minus"
    assert cfg["eta"] == 1.0 and cfg["kappa"] == 1.0
    assert cfg["dt"] == pytest.approx(1e-3)
    assert cfg["initial_state"] == "phi_plus"
    assert cfg["n_traj"] == 2000 and cfg["seed"] == 12345
    assert len(cfg["kappa_grid"]) == 201 and cfg["kappa_grid"][-1] == 10.0
    assert cfg["dump"] is False
    # resolved configs are JSON-serializable and idempotent
    again = resolve(json.loads(json.dumps(cfg)))
    assert again == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config keys: kapa"):
        resolve({"kapa": 1.0})


def test_mode_mismatch_rejected():
    with pytest.raises(ConfigError, match="does not match"):
        resolve({"mode": "curves"}, mode="steady")


def test_temperature_specification():
    cfg = resolve({"n_B": 1.0, "n_F": 2.0})
    assert cfg["beta_omega_B"] == pytest.approx(math.log(2))
    assert cfg["beta_omega_F"] == pytest.approx(math.log(1.5))
    with pytest.raises(ConfigError, match="not both"):
        resolve({"n_B": 1.0, "n_F": 1.0, "beta_omega_B": 0.7,
                 "beta_omega_F": 0.7})
    with pytest.raises(ConfigError, match="partner"):
        resolve({"n_B": 1.0})
    with pytest.raises(ConfigError, match="partner"):
        resolve({"beta_omega_F": 0.5})
    with pytest.raises(ConfigError, match="must be > 0"):
        resolve({"n_B": 0.0, "n_F": 1.0})


def test_sweep_lists_only_in_curves_mode():
    with pytest.raises(ConfigError, match="only in curves mode"):
        resolve({"eta": [0.0, 1.0]}, mode="steady")
    cfg = resolve({"eta": [0.0, 1.0], "kappa": [0.5]}, mode="curves")
    assert cfg["eta"] == [0.0, 1.0] and cfg["kappa"] == [0.5]
    # scalars canonicalize to singleton lists in curves mode
    assert cfg["scheme"] == ["homodyne"] and cfg["coupling"] == ["sigma_minus"]
    with pytest.raises(ConfigError, match="empty"):
        resolve({"kappa": []}, mode="curves")


def test_field_validation():
    for raw in ({"eta": 1.5}, {"eta": -0.1}, {"kappa": -1.0}, {"gamma": 0.0},
                {"dt": 0.0}, {"t_max": 0.0}, {"n_traj": 3}, {"n_traj": 1},
                {"seed": -1}, {"seed": 2 ** 64}, {"n_grid": 1},
                {"workers": 0}, {"scheme": "heterodyne"},
                {"coupling": "sigma_z"}, {"dump": 1}, {"out": 3},
                {"n_traj": 2.0}, {"kappa_grid": [-0.5]}, {"kappa_grid": 7}):
        with pytest.raises(ConfigError):
            resolve(raw)
    with pytest.raises(ConfigError, match="JSON object"):
        resolve([1, 2])


def test_initial_state_canonicalization():
    r = 1.0 / math.sqrt(2.0)
    cfg = resolve({"initial_state": [r, 0.0, 0.0, r]})
    assert cfg["initial_state"] == [[r, 0.0], [0.0, 0.0], [0.0, 0.0], [r, 0.0]]
    assert np.allclose(build_initial_state(cfg["initial_state"]),
                       qcore.phi_plus_state())
    assert np.array_equal(build_initial_state("ground"), qcore.ground_state())
    assert np.array_equal(build_initial_state("excited"), qcore.excited_state())
    with pytest.raises(ConfigError, match="normalized"):
        resolve({"initial_state": [1.0, 1.0, 0.0, 0.0]})
    with pytest.raises(ConfigError, match="initial_state"):
        resolve({"initial_state": "psi_minus"})
    with pytest.raises(ConfigError, match="initial_state"):
        resolve({"initial_state": [1.0, 0.0]})


def test_flag_overrides():
    class Args:
        seed = 99
        out = "somewhere"
        workers = 2
        dt = 5e-4
    cfg = resolve_config({"seed": 1, "dt": 1e-3}, "steady", Args())
    assert cfg["seed"] == 99 and cfg["out"] == "somewhere"
    assert cfg["workers"] == 2 and cfg["dt"] == 5e-4


# ---------------------------------------------------------------------------
# steady mode
# ---------------------------------------------------------------------------

def test_run_steady_outputs(tmp_path):
    grid = [0.0, 1.0 / 3.0, 1.0]
    cfg = resolve({"n_B": 1.0, "n_F": 2.0, "kappa_grid": grid,
                   "out": str(tmp_path)})
    assert run_steady(cfg) == 0
    lines = (tmp_path / "steady.csv").read_text().splitlines()
    assert lines[0] == "kappa_over_gamma,hep_infinity,heat_flow_B,heat_flow_F"
    assert len(lines) == 1 + len(grid)
    for ln, k in zip(lines[1:], grid):
        vals = [float(v) for v in ln.split(",")]
        rep = steady_report(ModelParams.from_occupations(1.0, 2.0, kappa=k))
        assert vals[0] == k
        assert vals[1] == rep.hep_infinity
        assert vals[2] == rep.heat_flow_B and vals[3] == rep.heat_flow_F
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["mode"] == "steady"
    assert summary["kappa_best_over_gamma"] is None  # unequal temperatures
    assert summary["kappa_critical_over_gamma"] == pytest.approx(1.0 / 3.0)
    assert summary["outputs"] == ["steady.csv"]


def test_run_steady_equal_temperature_annotations(tmp_path):
    cfg = resolve({"kappa_grid": [0.0, 1.0], "out": str(tmp_path)})
    run_steady(cfg)
    summary = json.loads((tmp_path / "summary.json").read_text())
    # defaults: N_B = 1, so the best coupling is gamma sqrt(2N+1) = sqrt(3)
    assert summary["kappa_best_over_gamma"] == pytest.approx(math.sqrt(3.0))
    assert summary["kappa_critical_over_gamma"] is None


# ---------------------------------------------------------------------------
# curves mode
# ---------------------------------------------------------------------------

CURVES_RAW = {
    "scheme": ["photodetection", "homodyne"],
    "coupling": "sigma_minus",
    "eta": 1.0,
    "kappa": [1.0],
    "t_max": 0.02,
    "n_traj": 4,
    "n_grid": 5,
    "seed": 21,
    "dump": True,
    "workers": 1,
}


def test_run_curves_files_and_reproducibility(tmp_path):
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    cfg_a = resolve(dict(CURVES_RAW, out=str(dir_a)), mode="curves")
    assert run_curves(cfg_a) == 0
    summary = json.loads((dir_a / "summary.json").read_text())
    assert [r["file"] for r in summary["runs"]] == [
        "curves_photodetection_sigma_minus_eta1_kappa1.csv",
        "curves_homodyne_sigma_minus_eta1_kappa1.csv",
    ]
    for r in summary["runs"]:
        assert r["dump_file"] == r["file"].replace("curves_", "trajectories_")
        assert r["n_traj"] == 4 and r["seed"] == 21
        assert r["min_eigenvalue"] > -1e-12
        assert (dir_a / r["file"]).exists()
        assert (dir_a / r["dump_file"]).exists()
    # rerunning from the embedded (already-resolved) config is byte-identical
    cfg_b = resolve_config(dict(summary["config"], out=str(dir_b)), "curves")
    assert run_curves(cfg_b) == 0
    for r in summary["runs"]:
        for name in (r["file"], r["dump_file"]):
            assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes()


def test_run_curves_no_dump_for_unmonitored(tmp_path):
    raw = dict(CURVES_RAW, scheme=["none"], out=str(tmp_path))
    cfg = resolve(raw, mode="curves")
    assert run_curves(cfg) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    run = summary["runs"][0]
    assert run["dump_file"] is None
    assert not list(tmp_path.glob("trajectories_*"))
    assert (tmp_path / run["file"]).exists()


# ---------------------------------------------------------------------------
# validate mode
# ---------------------------------------------------------------------------

def test_run_validate_passes(tmp_path, capsys):
    cfg = resolve({"out": str(tmp_path), "workers": 1,
                   "n_traj": 400}, mode="validate")
    rc = run_validate(cfg)
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "all checks passed" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    names = [c["check"] for c in summary["checks"]]
    assert names == ["dt_guard", "steady_analytic_vs_numeric",
                     "kraus_completeness", "likelihood_normalization",
                     "brute_force_vs_mc", "unconditional_consistency",
                     "dt_halving"]
    assert all(c["status"] == "PASS" for c in summary["checks"])
    for name in names:
        assert any(ln.startswith(name) and " PASS " in ln
                   for ln in out.splitlines()), name


def test_run_validate_fails_on_guard_violation(tmp_path, capsys):
    cfg = resolve({"kappa": 100.0, "out": str(tmp_path), "workers": 1,
                   "n_traj": 400}, mode="validate")
    rc = run_validate(cfg)
    out = capsys.readouterr().out
    assert rc == 1
    assert "FAILURES detected" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    status = {c["check"]: c["status"] for c in summary["checks"]}
    assert status["dt_guard"] == "FAIL"
    # the temperature-only analytics are untouched by the monitor coupling
    assert status["steady_analytic_vs_numeric"] == "PASS"


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def test_main_version_and_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "bathtag" in capsys.readouterr().out

    assert main(["steady", "--config", str(tmp_path / "missing.json")]) == 2
    assert "config error" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["steady", "--config", str(bad)]) == 2

    overeta = tmp_path / "eta.json"
    overeta.write_text(json.dumps({"eta": 1.5}))
    assert main(["curves", "--config", str(overeta)]) == 2
    assert "eta" in capsys.readouterr().err


def test_main_runs_steady(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"kappa_grid": [0.0, 1.0]}))
    rc = main(["steady", "--config", str(cfg_path), "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "steady.csv").exists()
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["out"] == str(tmp_path)


def test_console_script_installed():
    exe = shutil.which("bathtag")
    assert exe, "console script 'bathtag' not on PATH"
    out = subprocess.run([exe, "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "bathtag" in out.stdout
