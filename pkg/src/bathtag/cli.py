"""Batch experiment runner emitting figure-ready CSV/JSON data.

Subcommands:

* ``steady``   — closed-form steady-state discrimination curves over a
  kappa/gamma grid (CSV plus a summary with the optimal and critical
  couplings annotated).
* ``curves``   — Monte Carlo discrimination reports, one CSV per requested
  (scheme, coupling, eta, kappa) combination.
* ``validate`` — self-check suite wiring the analytic oracles against the
  trajectory machinery; exit status 0 only if every check passes.

Configuration is a single JSON document (--config); the --seed / --out /
--workers / --dt flags override the corresponding keys. Unknown keys are
rejected before any computation. Data files are written atomically with
17-significant-digit numbers, so a fixed config reproduces outputs byte for
byte; each run's summary.json embeds the fully resolved config for exactly
that purpose.
"""

import argparse
import itertools
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__, qcore
from ._util import atomic_write_text, fmt17
from .lindblad import (Coupling, Hypothesis, ModelParams, kappa_best,
                       kappa_critical, propagate, steady_populations,
                       steady_report)
from .monitor import (KAPPA_DT_GUARD, MeasurementScheme, SchemeKind,
                      kraus_homodyne, kraus_photodetection, step,
                      trajectory_rng)
from .tagging import brute_force_pd, mc_campaign, write_report_csv


class ConfigError(ValueError):
    """Invalid experiment configuration (schema or value errors)."""


class CheckFailure(Exception):
    """A validate-mode check ran to completion and failed its bound."""


_SCHEME_KINDS = {
    "photodetection": SchemeKind.PHOTODETECTION,
    "homodyne": SchemeKind.HOMODYNE,
    "none": SchemeKind.NONE,
}
_COUPLINGS = {
    "sigma_minus": Coupling.SIGMA_MINUS,
    "sigma_x_half": Coupling.SIGMA_X_HALF,
}
_STATE_NAMES = ("ground", "excited", "phi_plus")

_KNOWN_KEYS = {
    "mode", "gamma", "omega0", "beta_omega_B", "beta_omega_F", "n_B", "n_F",
    "coupling", "scheme", "eta", "kappa", "dt", "initial_state", "t_max",
    "n_traj", "seed", "n_grid", "kappa_grid", "workers", "out", "dump",
}
# keys that may hold a list of values to sweep over (curves mode only)
_SWEEP_KEYS = ("scheme", "coupling", "eta", "kappa")


def _default_config():
    return {
        "gamma": 1.0,
        "omega0": 0.0,
        "beta_omega_B": float(np.log(2.0)),
        "beta_omega_F": float(np.log(2.0)),
        "coupling": "sigma_minus",
        "scheme": "homodyne",
        "eta": 1.0,
        "kappa": 1.0,
        "dt": None,              # resolved to 1e-3 / gamma
        "initial_state": "phi_plus",
        "t_max": 10.0,
        "n_traj": 2000,
        "seed": 12345,
        "n_grid": 200,
        "kappa_grid": None,      # resolved to linspace(0, 10, 201) in steady
        "workers": None,         # resolved to the available core count at run time
        "out": ".",
        "dump": False,
    }


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

def _require_number(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite, got {v}")
    return v


def _require_float(cfg, key, lo=None, hi=None, lo_open=False):
    v = _require_number(key, cfg[key])
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(f"{key} must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(f"{key} must be <= {hi}, got {v}")
    cfg[key] = v
    return v


def _require_int(cfg, key, lo=None, hi=None):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{key} must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(f"{key} must be <= {hi}, got {v}")
    return v


def _canon_sweep(cfg, key, mode, check_one):
    """Normalize a sweep key to a validated scalar, or list in curves mode."""
    v = cfg[key]
    if isinstance(v, list):
        if mode != "curves":
            raise ConfigError(f"{key} may hold a list only in curves mode")
        if not v:
            raise ConfigError(f"{key} must not be an empty list")
        cfg[key] = [check_one(key, item) for item in v]
    else:
        canon = check_one(key, v)
        cfg[key] = [canon] if mode == "curves" else canon


def _check_choice(table):
    def check(key, v):
        if not isinstance(v, str) or v not in table:
            raise ConfigError(
                f"{key} must be one of {sorted(table)}, got {v!r}")
        return v
    return check


def _check_eta(key, v):
    v = _require_number(key, v)
    if not 0.0 <= v <= 1.0:
        raise ConfigError(f"{key} must lie in [0, 1], got {v}")
    return v


def _check_kappa(key, v):
    v = _require_number(key, v)
    if v < 0.0:
        raise ConfigError(f"{key} must be >= 0, got {v}")
    return v


def _canon_initial_state(v):
    if isinstance(v, str):
        name = v.strip().lower()
        if name not in _STATE_NAMES:
            raise ConfigError(
                f"initial_state must be one of {_STATE_NAMES} or 4 amplitudes,"
                f" got {v!r}")
        return name
    if isinstance(v, list) and len(v) == 4:
        amps = []
        for entry in v:
            if isinstance(entry, list) and len(entry) == 2:
                amps.append([_require_number("initial_state", entry[0]),
                             _require_number("initial_state", entry[1])])
            else:
                amps.append([_require_number("initial_state", entry), 0.0])
        norm_sq = sum(re * re + im * im for re, im in amps)
        if abs(norm_sq - 1.0) > 1e-6:
            raise ConfigError(
                f"custom initial_state must be normalized (|psi|^2 = {norm_sq})")
        return amps
    raise ConfigError(
        "initial_state must be 'ground', 'excited', 'phi_plus', or a list of"
        " 4 amplitudes ([re, im] pairs)")


def resolve_config(raw, mode, args=None):
    """Validate and canonicalize a raw config dict for the given mode.

    Returns a fully resolved, JSON-serializable config that reproduces the
    run when fed back in. Raises ConfigError on any schema violation.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "mode" in raw and raw["mode"] != mode:
        raise ConfigError(
            f"config mode {raw['mode']!r} does not match subcommand {mode!r}")

    has_beta = [k for k in ("beta_omega_B", "beta_omega_F") if k in raw]
    has_n = [k for k in ("n_B", "n_F") if k in raw]
    if has_beta and has_n:
        raise ConfigError("give either beta_omega_B/beta_omega_F or n_B/n_F, not both")
    for group in (("beta_omega_B", "beta_omega_F"), ("n_B", "n_F")):
        present = [k for k in group if k in raw]
        if len(present) == 1:
            raise ConfigError(f"{present[0]} requires its partner {group}")

    cfg = _default_config()
    cfg.update({k: v for k, v in raw.items() if k not in ("mode", "n_B", "n_F")})
    if has_n:
        n_b = _require_number("n_B", raw["n_B"])
        n_f = _require_number("n_F", raw["n_F"])
        if n_b <= 0 or n_f <= 0:
            raise ConfigError("n_B and n_F must be > 0")
        cfg["beta_omega_B"] = float(np.log1p(1.0 / n_b))
        cfg["beta_omega_F"] = float(np.log1p(1.0 / n_f))

    # command-line flags override file keys
    if args is not None:
        for key in ("seed", "out", "workers", "dt"):
            v = getattr(args, key, None)
            if v is not None:
                cfg[key] = v

    _require_float(cfg, "gamma", lo=0.0, lo_open=True)
    _require_float(cfg, "omega0", lo=0.0)
    _require_float(cfg, "beta_omega_B")
    _require_float(cfg, "beta_omega_F")
    _canon_sweep(cfg, "coupling", mode, _check_choice(_COUPLINGS))
    _canon_sweep(cfg, "scheme", mode, _check_choice(_SCHEME_KINDS))
    _canon_sweep(cfg, "eta", mode, _check_eta)
    _canon_sweep(cfg, "kappa", mode, _check_kappa)
    if cfg["dt"] is None:
        cfg["dt"] = 1e-3 / cfg["gamma"]
    _require_float(cfg, "dt", lo=0.0, lo_open=True)
    cfg["initial_state"] = _canon_initial_state(cfg["initial_state"])
    _require_float(cfg, "t_max", lo=0.0, lo_open=True)
    _require_int(cfg, "n_traj", lo=2)
    if cfg["n_traj"] % 2:
        raise ConfigError(f"n_traj must be even, got {cfg['n_traj']}")
    _require_int(cfg, "seed", lo=0, hi=2 ** 64 - 1)
    _require_int(cfg, "n_grid", lo=2)
    if cfg["kappa_grid"] is None:
        cfg["kappa_grid"] = [float(x) for x in np.linspace(0.0, 10.0, 201)]
    if not isinstance(cfg["kappa_grid"], list) or not cfg["kappa_grid"]:
        raise ConfigError("kappa_grid must be a non-empty list of kappa/gamma values")
    cfg["kappa_grid"] = [_check_kappa("kappa_grid", v) for v in cfg["kappa_grid"]]
    if cfg["workers"] is not None:
        _require_int(cfg, "workers", lo=1)
    if not isinstance(cfg["out"], str):
        raise ConfigError(f"out must be a directory path, got {cfg['out']!r}")
    if not isinstance(cfg["dump"], bool):
        raise ConfigError(f"dump must be true or false, got {cfg['dump']!r}")
    cfg["mode"] = mode
    # ModelParams re-validates the physical ranges (occupations in particular)
    _make_params(cfg, kappa=0.0,
                 coupling=cfg["coupling"][0] if mode == "curves" else cfg["coupling"])
    return cfg


def _make_params(cfg, kappa, coupling):
    try:
        return ModelParams(
            gamma=cfg["gamma"], kappa=kappa, omega0=cfg["omega0"],
            beta_omega_B=cfg["beta_omega_B"], beta_omega_F=cfg["beta_omega_F"],
            coupling=_COUPLINGS[coupling])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_initial_state(spec):
    if spec == "ground":
        return qcore.ground_state()
    if spec == "excited":
        return qcore.excited_state()
    if spec == "phi_plus":
        return qcore.phi_plus_state()
    ket = np.array([complex(re, im) for re, im in spec])
    return np.outer(ket, ket.conj()) / float(np.vdot(ket, ket).real)


def _workers(cfg):
    if cfg["workers"] is not None:
        return cfg["workers"]
    return max(1, os.cpu_count() or 1)


def _write_summary(out_dir, payload):
    path = os.path.join(out_dir, "summary.json")
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# steady mode
# ---------------------------------------------------------------------------

def run_steady(cfg):
    t_start = time.perf_counter()
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    gamma = cfg["gamma"]
    lines = ["kappa_over_gamma,hep_infinity,heat_flow_B,heat_flow_F"]
    for k_over_g in cfg["kappa_grid"]:
        rep = steady_report(_make_params(cfg, kappa=k_over_g * gamma,
                                         coupling=cfg["coupling"]))
        lines.append(",".join(fmt17(v) for v in (
            k_over_g, rep.hep_infinity, rep.heat_flow_B, rep.heat_flow_F)))
    csv_path = os.path.join(out_dir, "steady.csv")
    atomic_write_text(csv_path, "\n".join(lines) + "\n")

    params0 = _make_params(cfg, kappa=0.0, coupling=cfg["coupling"])
    try:
        k_best = kappa_best(params0) / gamma
    except ValueError:
        k_best = None  # only defined at equal temperatures
    k_crit = kappa_critical(params0)
    summary = {
        "mode": "steady",
        "version": __version__,
        "config": cfg,
        "outputs": [os.path.basename(csv_path)],
        "kappa_best_over_gamma": k_best,
        "kappa_critical_over_gamma": None if k_crit is None else k_crit / gamma,
        "wall_time_s": time.perf_counter() - t_start,
    }
    _write_summary(out_dir, summary)
    return 0


# ---------------------------------------------------------------------------
# curves mode
# ---------------------------------------------------------------------------

def _combo_tag(scheme, coupling, eta, kappa):
    return f"{scheme}_{coupling}_eta{eta:g}_kappa{kappa:g}"


def run_curves(cfg):
    t_start = time.perf_counter()
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    rho0 = build_initial_state(cfg["initial_state"])
    workers = _workers(cfg)
    runs = []
    combos = itertools.product(cfg["scheme"], cfg["coupling"], cfg["eta"],
                               cfg["kappa"])
    for scheme_name, coupling_name, eta, kappa in combos:
        params = _make_params(cfg, kappa=kappa, coupling=coupling_name)
        scheme = MeasurementScheme(_SCHEME_KINDS[scheme_name], eta=eta,
                                   dt=cfg["dt"])
        tag = _combo_tag(scheme_name, coupling_name, eta, kappa)
        dump_path = (os.path.join(out_dir, f"trajectories_{tag}.csv")
                     if cfg["dump"] and scheme.kind is not SchemeKind.NONE
                     else None)
        report = mc_campaign(params, scheme, rho0, cfg["t_max"], cfg["n_traj"],
                             cfg["seed"], workers=workers, n_grid=cfg["n_grid"],
                             dump_path=dump_path)
        csv_name = f"curves_{tag}.csv"
        write_report_csv(report, os.path.join(out_dir, csv_name))
        runs.append({
            "file": csv_name,
            "dump_file": None if dump_path is None else os.path.basename(dump_path),
            "scheme": scheme_name,
            "coupling": coupling_name,
            "eta": eta,
            "kappa": kappa,
            "kappa_over_gamma": kappa / cfg["gamma"],
            "n_traj": report.n_traj,
            "seed": report.seed,
            "dt": report.dt,
            "min_eigenvalue": report.min_eigenvalue,
            "max_trace_dev": report.max_trace_dev,
            "wall_time_s": report.wall_time,
        })
    summary = {
        "mode": "curves",
        "version": __version__,
        "config": cfg,
        "runs": runs,
        "wall_time_s": time.perf_counter() - t_start,
    }
    _write_summary(out_dir, summary)
    return 0


# ---------------------------------------------------------------------------
# validate mode
# ---------------------------------------------------------------------------

def _gauss_hermite_dy(dt, degree=8):
    """(dy nodes, probability weights) for averaging over dy ~ N(0, dt)."""
    x, w = np.polynomial.hermite_e.hermegauss(degree)
    return x * np.sqrt(dt), w / np.sqrt(2.0 * np.pi)


def run_validate(cfg):
    t_start = time.perf_counter()
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    gamma, dt, eta, seed = cfg["gamma"], cfg["dt"], cfg["eta"], cfg["seed"]
    workers = _workers(cfg)
    params = _make_params(cfg, kappa=cfg["kappa"], coupling=cfg["coupling"])
    rho0 = qcore.plus_state()

    def check_dt_guard():
        v = params.kappa * dt
        if v > KAPPA_DT_GUARD:
            raise CheckFailure(f"kappa*dt = {v:.3g} exceeds the guard {KAPPA_DT_GUARD}")
        return f"kappa*dt = {v:.3g} <= {KAPPA_DT_GUARD}"

    def check_steady():
        worst = 0.0
        for coupling in _COUPLINGS.values():
            for n_b, n_f in ((1.0, 1.0), (0.5, 2.0)):
                for k_over_g in (0.0, 1.0, math.sqrt(5.0)):
                    p = ModelParams.from_occupations(
                        n_b, n_f, gamma=gamma, kappa=k_over_g * gamma,
                        omega0=cfg["omega0"], coupling=coupling)
                    for q in Hypothesis:
                        num = propagate(p, q, rho0, 50.0 / gamma)[0, 0].real
                        worst = max(worst, abs(num - steady_populations(p, q)))
        if worst > 1e-8:
            raise CheckFailure(f"max |numeric - analytic| = {worst:.3e} > 1e-8")
        return f"max |numeric - analytic| population gap = {worst:.2e}"

    def check_kraus():
        worst = 0.0
        dy, w = _gauss_hermite_dy(dt)
        for coupling in _COUPLINGS.values():
            p = replace(params, coupling=coupling)
            c = coupling.matrix
            cdc = c.conj().T @ c
            expected = qcore.ID2 + 0.25 * (p.kappa * dt) ** 2 * (cdc @ cdc)
            pd = kraus_photodetection(
                p, MeasurementScheme(SchemeKind.PHOTODETECTION, eta=eta, dt=dt))
            worst = max(worst, np.abs(pd.completeness_sum() - expected).max())
            sch = MeasurementScheme(SchemeKind.HOMODYNE, eta=eta, dt=dt)
            total = sum(wk * kraus_homodyne(p, sch, dyk).completeness_sum()
                        for dyk, wk in zip(dy, w))
            worst = max(worst, np.abs(total - expected).max())
        if worst > 1e-12:
            raise CheckFailure(
                f"completeness defect off its closed form by {worst:.3e}")
        return f"defect matches kappa^2 (c^dag c)^2 dt^2/4 to {worst:.2e}"

    def check_likelihood():
        worst = 0.0
        dy, w = _gauss_hermite_dy(dt)
        pd = MeasurementScheme(SchemeKind.PHOTODETECTION, eta=eta, dt=dt)
        hd = MeasurementScheme(SchemeKind.HOMODYNE, eta=eta, dt=dt)
        for q in Hypothesis:
            tot = sum(math.exp(step(params, q, pd, rho0, x)[1]) for x in (0, 1))
            worst = max(worst, abs(tot - 1.0))
            tot = sum(wk * math.exp(step(params, q, hd, rho0, dyk)[1])
                      for dyk, wk in zip(dy, w))
            worst = max(worst, abs(tot - 1.0))
        n_steps = 6
        bf = brute_force_pd(params, pd, rho0, n_steps)
        worst_prob = max(abs(bf.prob_total_B - 1.0), abs(bf.prob_total_F - 1.0))
        worst_lik = max(abs(bf.lik_total_B - 1.0), abs(bf.lik_total_F - 1.0))
        rec_tol = 10.0 * n_steps * dt * dt
        if worst > 1e-12 or worst_prob > rec_tol or worst_lik > rec_tol:
            raise CheckFailure(
                f"outcome sum off by {worst:.3e}, record totals off by "
                f"{max(worst_prob, worst_lik):.3e} (tol {rec_tol:.1e})")
        return (f"per-step outcome sums within {worst:.2e}, record totals "
                f"within {max(worst_prob, worst_lik):.2e}")

    def check_brute_force():
        sch = MeasurementScheme(SchemeKind.PHOTODETECTION, eta=eta, dt=dt)
        n_steps, n_traj = 6, 4000
        bf = brute_force_pd(params, sch, rho0, n_steps)
        rep = mc_campaign(params, sch, rho0, n_steps * dt, n_traj, seed,
                          workers=workers)
        gaps = []
        for mc, se, exact in ((rep.p_err_cont[-1], rep.se_cont[-1], bf.p_err_cont),
                              (rep.p_err_cont_proj[-1], rep.se_proj[-1],
                               bf.p_err_cont_proj)):
            gap = abs(mc - exact)
            gaps.append(gap / max(se, 1e-300))
            if gap > 3.0 * se:
                raise CheckFailure(
                    f"Monte Carlo off enumeration by {gap:.3e} > 3 se = {3 * se:.3e}")
        return f"both figures within {max(gaps):.2f} standard errors of enumeration"

    def check_unconditional():
        sch = MeasurementScheme(SchemeKind.HOMODYNE, eta=1.0, dt=dt)
        rep = mc_campaign(params, sch, rho0, 0.5 / gamma, 600, seed + 1,
                          workers=workers)
        dim = rho0.shape[0]
        worst = -np.inf
        idx = np.unique(np.rint(np.linspace(0, rep.t_grid.size - 1, 10)).astype(int))
        for q, mean, se in ((Hypothesis.BOSE, rep.mean_cond_true_B,
                             rep.se_fro_true_B),
                            (Hypothesis.FERMI, rep.mean_cond_true_F,
                             rep.se_fro_true_F)):
            for k in idx[1:]:
                exact = propagate(params, q, rho0, float(rep.t_grid[k]))
                dist = 0.5 * qcore.trace_norm(mean[k] - exact)
                worst = max(worst, dist - 3.0 * (np.sqrt(dim) / 2.0) * se[k])
        if worst > 0.0:
            raise CheckFailure(
                f"mean conditional state misses propagation by {worst:.3e} "
                "beyond 3 standard errors")
        return f"trajectory average within 3 standard errors (margin {-worst:.2e})"

    def check_dt_halving():
        sch_c = MeasurementScheme(SchemeKind.HOMODYNE, eta=1.0, dt=dt)
        sch_f = MeasurementScheme(SchemeKind.HOMODYNE, eta=1.0, dt=dt / 2.0)
        t_max, n_traj = 1.0 / gamma, 400
        n_fine = 2 * int(round(t_max / dt))

        def base_noise(i):
            return (trajectory_rng(seed + 2, i).standard_normal(n_fine)
                    * np.sqrt(dt / 2.0))

        rep_f = mc_campaign(params, sch_f, rho0, t_max, n_traj, seed + 2,
                            workers=workers,
                            noise_fn=lambda i, n: base_noise(i))
        rep_c = mc_campaign(params, sch_c, rho0, t_max, n_traj, seed + 2,
                            workers=workers,
                            noise_fn=lambda i, n: base_noise(i)
                            .reshape(-1, 2).sum(axis=1))
        gap = abs(rep_c.p_err_cont_proj[-1] - rep_f.p_err_cont_proj[-1])
        se = max(rep_c.se_proj[-1], rep_f.se_proj[-1])
        if gap >= se:
            raise CheckFailure(f"halving dt moved p_err_cont_proj by {gap:.3e} "
                               f">= 1 se = {se:.3e}")
        return f"halving dt moved p_err_cont_proj by {gap:.2e} < se = {se:.2e}"

    checks = [
        ("dt_guard", check_dt_guard),
        ("steady_analytic_vs_numeric", check_steady),
        ("kraus_completeness", check_kraus),
        ("likelihood_normalization", check_likelihood),
        ("brute_force_vs_mc", check_brute_force),
        ("unconditional_consistency", check_unconditional),
        ("dt_halving", check_dt_halving),
    ]
    rows = []
    all_ok = True
    for name, fn in checks:
        try:
            detail = fn()
            ok = True
        except Exception as exc:  # a failed bound or a crashed check both fail
            detail = f"{type(exc).__name__}: {exc}" if not isinstance(
                exc, CheckFailure) else str(exc)
            ok = False
        all_ok &= ok
        rows.append({"check": name, "status": "PASS" if ok else "FAIL",
                     "detail": detail})
        print(f"{name:<30} {'PASS' if ok else 'FAIL':<6} {detail}")

    summary = {
        "mode": "validate",
        "version": __version__,
        "config": cfg,
        "checks": rows,
        "wall_time_s": time.perf_counter() - t_start,
    }
    _write_summary(out_dir, summary)
    print(f"{'all checks passed' if all_ok else 'FAILURES detected'} "
          f"({time.perf_counter() - t_start:.1f} s)")
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="bathtag",
        description="Thermal-bath tagging experiments: steady-state curves, "
                    "monitored-trajectory campaigns, and self-validation.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    helps = {
        "steady": "closed-form steady-state discrimination curves",
        "curves": "Monte Carlo discrimination reports per configuration",
        "validate": "run the self-check suite (exit 0 iff all checks pass)",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", metavar="PATH",
                        help="JSON experiment configuration")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory (default '.')")
        sp.add_argument("--workers", type=int,
                        help="parallel trajectory workers (default: all cores)")
        sp.add_argument("--dt", type=float, help="override the integration step")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        cfg = resolve_config(raw, args.mode, args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    runner = {"steady": run_steady, "curves": run_curves,
              "validate": run_validate}[args.mode]
    try:
        return runner(cfg)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
