"""Benchmark the jit-compiled trajectory kernels against the numpy fallback.

Runs the identical seeded workload through both code paths, reports the
per-trajectory stepping cost and speedup, and cross-checks that the two
implementations agree to near round-off.

Usage: python3 benchmarks/bench_kernels.py [--n-traj 64] [--n-steps 2000] ...
"""

import argparse
import time

import numpy as np

from bathtag import qcore
from bathtag._kernels import NUMBA_ENABLED
from bathtag.lindblad import Coupling, ModelParams
from bathtag.monitor import MeasurementScheme, SchemeKind, iter_ensemble


def run_path(args, scheme, rho0, use_numba):
    snap = np.array([0, args.n_steps], dtype=np.int64)
    params = ModelParams(gamma=1.0, kappa=args.kappa, beta_omega_B=1 / 5.5,
                         beta_omega_F=1 / 5.5, coupling=Coupling.SIGMA_MINUS)
    # one throwaway trajectory: triggers compilation / cache-load outside
    # the timed region so both paths are measured warm
    for _ in iter_ensemble(params, scheme, rho0, args.n_steps, snap, 2,
                           args.seed, workers=1, use_numba=use_numba):
        pass
    t0 = time.perf_counter()
    outs = [(snap_b, snap_f, ll_b, ll_f)
            for (_, _, snap_b, snap_f, ll_b, ll_f, _)
            in iter_ensemble(params, scheme, rho0, args.n_steps, snap,
                             args.n_traj, args.seed, workers=1,
                             use_numba=use_numba)]
    elapsed = time.perf_counter() - t0
    return elapsed, outs


def deviation(a, b):
    worst = 0.0
    for (sb1, sf1, lb1, lf1), (sb2, sf2, lb2, lf2) in zip(a, b):
        worst = max(worst,
                    np.abs(sb1 - sb2).max(), np.abs(sf1 - sf2).max(),
                    np.abs(lb1 - lb2).max(), np.abs(lf1 - lf2).max())
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-traj", type=int, default=64)
    ap.add_argument("--n-steps", type=int, default=2000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--kappa", type=float, default=1.0)
    ap.add_argument("--eta", type=float, default=1.0)
    ap.add_argument("--scheme", choices=["photodetection", "homodyne"],
                    default="homodyne")
    ap.add_argument("--entangled", action="store_true", default=True,
                    help="use the entangled probe+memory input (dim 4)")
    ap.add_argument("--probe-only", dest="entangled", action="store_false")
    ap.add_argument("--seed", type=int, default=20260815)
    args = ap.parse_args()

    if not NUMBA_ENABLED:
        raise SystemExit("numba path unavailable (not installed, or disabled "
                         "via BATHTAG_DISABLE_NUMBA=1); nothing to compare")

    kind = SchemeKind[args.scheme.upper()]
    scheme = MeasurementScheme(kind, eta=args.eta, dt=args.dt)
    rho0 = qcore.phi_plus_state() if args.entangled else qcore.excited_state()

    print(f"workload: {args.n_traj} trajectories x {args.n_steps} steps, "
          f"{args.scheme}, dim {rho0.shape[0]}, dt {args.dt:g}, "
          f"kappa {args.kappa:g}, eta {args.eta:g}, seed {args.seed}")

    t_np, out_np = run_path(args, scheme, rho0, use_numba=False)
    t_nb, out_nb = run_path(args, scheme, rho0, use_numba=True)
    dev = deviation(out_np, out_nb)

    ms_np = 1e3 * t_np / args.n_traj
    ms_nb = 1e3 * t_nb / args.n_traj
    print(f"numpy fallback : {ms_np:8.3f} ms/trajectory  ({t_np:.2f} s total)")
    print(f"numba kernels  : {ms_nb:8.3f} ms/trajectory  ({t_nb:.2f} s total)")
    print(f"speedup        : {ms_np / ms_nb:8.2f} x")
    print(f"max |numba - numpy| over states and log-likelihoods: {dev:.3e}")
    if dev > 1e-12:
        raise SystemExit("FAIL: paths disagree beyond round-off")
    print("paths agree to round-off")


if __name__ == "__main__":
    main()
