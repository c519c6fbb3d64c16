"""Bath-tagging figures of merit over trajectory ensembles, plus exact oracles.

Two error probabilities quantify how well a record ensemble discriminates the
bosonic from the fermionic bath hypothesis (flat priors):

* ``p_err_cont``: fraction of trajectories whose running posterior tags the
  wrong hypothesis; exact posterior ties count with weight 1/2.
* ``p_err_cont_proj``: ensemble mean of the conditional Helstrom error
  probability — the error after an optimal final projective measurement on
  the conditional filter pair, averaged over records.

``brute_force_pd`` removes Monte Carlo noise entirely for short
photodetection records by enumerating all 2^n click strings with exact
per-record weights; ``mc_campaign`` is the seeded, reproducible ensemble
harness that produces figure-ready report tables.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import qcore
from ._kernels import _hermitize
from ._util import atomic_write_text, atomic_writer, fmt17
from .lindblad import Hypothesis
from .monitor import SchemeKind, _step_operators, check_guard, iter_ensemble

# Log-likelihood-ratio magnitudes at or below this are posterior ties.
# Uninformative schemes produce logits that are exactly zero by construction;
# the tolerance only needs to clear accumulated round-off on informative ones,
# where logits at any decision-relevant time are orders of magnitude larger.
TIE_LOGIT_TOL = 1e-9


def p_err_cont(results, t):
    """Wrong-tag fraction of an ensemble at time t (posterior ties weigh 1/2).

    results: TrajectoryResult sequence, half true-B and half true-F.
    """
    results = list(results)
    if not results:
        raise ValueError("empty ensemble")
    total = 0.0
    for res in results:
        i = res.step_index(t)
        logit = res.loglik_B[i] - res.loglik_F[i]
        if abs(logit) <= TIE_LOGIT_TOL:
            total += 0.5
        elif (logit < 0.0) == (res.true_q is Hypothesis.BOSE):
            total += 1.0
    return total / len(results)


def hep_conditional(cond_b, cond_f, posterior_b):
    """Helstrom error of the posterior-weighted conditional pair.

    Returns (1 - ||(1-P_B) rho_F - P_B rho_B||_1) / 2, the minimal error
    probability of any final projective measurement given the record so far.
    Always lies in [0, 1/2].
    """
    posterior_b = float(posterior_b)
    if not 0.0 <= posterior_b <= 1.0:
        raise ValueError(f"posterior_b must lie in [0, 1], got {posterior_b}")
    cond_b = np.asarray(cond_b, dtype=np.complex128)
    cond_f = np.asarray(cond_f, dtype=np.complex128)
    diff = (1.0 - posterior_b) * cond_f - posterior_b * cond_b
    return 0.5 * (1.0 - qcore.trace_norm(diff))


def p_err_cont_proj(results, t):
    """Ensemble mean of hep_conditional at time t."""
    results = list(results)
    if not results:
        raise ValueError("empty ensemble")
    total = 0.0
    for res in results:
        i = res.step_index(t)
        logit = res.loglik_B[i] - res.loglik_F[i]
        total += hep_conditional(res.cond_B[i], res.cond_F[i],
                                 float(expit(logit)))
    return total / len(results)


# ---------------------------------------------------------------------------
# brute-force photodetection oracle
# ---------------------------------------------------------------------------

BRUTE_FORCE_MAX_STEPS = 12


@dataclass(frozen=True)
class BruteForceResult:
    """Exact enumeration of every photodetection record of a short run.

    prob_total_*: total sampled-record probability under each true hypothesis;
    telescopes to 1 exactly (the enumeration measure is the sampling law).
    lik_total_*: sum over the same records of the filter likelihood
    exp(loglik). The per-step weights sum to 1 exactly, but records the
    sampler cannot produce (a click from an exactly-ground filter state) still
    carry O(dt^2) weight each, so this total is 1 - O(n^2 dt^2). mean_cond_*:
    record-probability-weighted average conditional state per hypothesis.
    Iterates as the pair (p_err_cont, p_err_cont_proj).
    """
    p_err_cont: float
    p_err_cont_proj: float
    prob_total_B: float
    prob_total_F: float
    lik_total_B: float
    lik_total_F: float
    mean_cond_B: np.ndarray
    mean_cond_F: np.ndarray

    def __iter__(self):
        return iter((self.p_err_cont, self.p_err_cont_proj))


def brute_force_pd(params, scheme, rho0, n_steps):
    """Enumerate all 2^n click records and compute exact error probabilities.

    Mirrors the Monte Carlo trajectory engine operation for operation (same
    per-outcome maps, same likelihood functionals, same normalization), so the
    only difference from mc_campaign estimates is sampling noise.
    """
    if scheme.kind is not SchemeKind.PHOTODETECTION:
        raise ValueError("brute force enumeration is for photodetection only")
    if not 0 <= n_steps <= BRUTE_FORCE_MAX_STEPS:
        raise ValueError(
            f"n_steps must lie in [0, {BRUTE_FORCE_MAX_STEPS}], got {n_steps}")
    rho0 = qcore.check_density_matrix(rho0, "rho0")
    check_guard(params, scheme)
    dim = rho0.shape[0]
    d2 = dim * dim
    ops_b = _step_operators(params, scheme, Hypothesis.BOSE, dim)
    ops_f = _step_operators(params, scheme, Hypothesis.FERMI, dim)

    err_sum = proj_sum = 0.0
    ptot_b = ptot_f = lik_b = lik_f = 0.0
    mean_b = np.zeros((dim, dim), dtype=np.complex128)
    mean_f = np.zeros((dim, dim), dtype=np.complex128)

    # depth-first over click strings: (depth, v_B, v_F, ll_B, ll_F, P_B, P_F)
    stack = [(0, qcore.vec(rho0), qcore.vec(rho0), 0.0, 0.0, 1.0, 1.0)]
    while stack:
        depth, vb, vf, llb, llf, pgb, pgf = stack.pop()
        if depth == n_steps:
            logit = llb - llf
            if abs(logit) <= TIE_LOGIT_TOL:
                err_sum += 0.25 * (pgb + pgf)
            elif logit < 0.0:
                err_sum += 0.5 * pgb
            else:
                err_sum += 0.5 * pgf
            rb, rf = qcore.unvec(vb), qcore.unvec(vf)
            proj_sum += 0.5 * (pgb + pgf) * hep_conditional(
                rb, rf, float(expit(logit)))
            ptot_b += pgb
            ptot_f += pgf
            lik_b += np.exp(llb)
            lik_f += np.exp(llf)
            mean_b += pgb * rb
            mean_f += pgf * rf
            continue
        p1b = np.dot(ops_b.sample_row, vb).real
        p1f = np.dot(ops_f.sample_row, vf).real
        for x in (0, 1):
            fb = p1b if x else 1.0 - p1b
            ff = p1f if x else 1.0 - p1f
            if fb <= 0.0 and ff <= 0.0:
                continue
            wb = np.dot(ops_b.f_rows[x], vb).real
            wf = np.dot(ops_f.f_rows[x], vf).real
            if wb <= 0.0 or wf <= 0.0:
                raise ValueError("nonpositive likelihood weight in enumeration")
            nvb = np.dot(ops_b.t_mats[x], vb)
            nvf = np.dot(ops_f.t_mats[x], vf)
            trb = nvb[:: dim + 1].sum().real
            trf = nvf[:: dim + 1].sum().real
            if trb <= 0.0 or trf <= 0.0:
                raise ValueError("nonpositive filter trace in enumeration")
            stack.append((depth + 1,
                          _hermitize(nvb / trb, dim, d2),
                          _hermitize(nvf / trf, dim, d2),
                          llb + np.log(wb), llf + np.log(wf),
                          pgb * fb, pgf * ff))

    return BruteForceResult(
        p_err_cont=err_sum,
        p_err_cont_proj=proj_sum,
        prob_total_B=ptot_b,
        prob_total_F=ptot_f,
        lik_total_B=lik_b,
        lik_total_F=lik_f,
        mean_cond_B=mean_b / ptot_b,
        mean_cond_F=mean_f / ptot_f,
    )


# ---------------------------------------------------------------------------
# Monte Carlo campaign harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscriminationReport:
    """Ensemble discrimination summary on a fixed time grid.

    se_*: per-point standard errors (binomial for the wrong-tag fraction,
    sample standard deviation of the mean for the projective stage).
    mean_cond_true_Q / se_fro_true_Q: average conditional state of the true-Q
    half-ensemble under its own filter, with the Frobenius-norm standard
    error of that mean — the unconditional-consistency watermark.
    min_eigenvalue / max_trace_dev: worst conditional-state invariant
    violations observed anywhere in the campaign.
    """
    t_grid: np.ndarray
    p_err_cont: np.ndarray
    se_cont: np.ndarray
    p_err_cont_proj: np.ndarray
    se_proj: np.ndarray
    n_wrong: np.ndarray
    n_traj: int
    seed: int
    dt: float
    min_eigenvalue: float
    max_trace_dev: float
    mean_cond_true_B: np.ndarray
    mean_cond_true_F: np.ndarray
    se_fro_true_B: np.ndarray
    se_fro_true_F: np.ndarray
    wall_time: float


def report_grid(n_steps, n_grid=200):
    """Snapshot steps: n_grid near-evenly spaced integers covering 0..n_steps."""
    pts = np.linspace(0.0, n_steps, min(int(n_grid), n_steps + 1))
    return np.unique(np.rint(pts).astype(np.int64))


def mc_campaign(params, scheme, rho0, t_max, n_traj, seed, workers=None,
                n_grid=200, dump_path=None, noise_fn=None, use_numba=None):
    """Run a seeded trajectory ensemble and evaluate both figures of merit.

    n_traj/2 trajectories are generated under each true hypothesis; trajectory
    i uses the (seed, i) counter stream, so reports are bit-reproducible for a
    fixed seed regardless of the worker count. dump_path writes the per-step
    record/log-likelihood table of every trajectory (monitored schemes only).
    """
    t_start = time.perf_counter()
    rho0 = qcore.check_density_matrix(rho0, "rho0")
    if not (np.isfinite(t_max) and t_max > 0.0):
        raise ValueError(f"t_max must be > 0, got {t_max}")
    n_steps = int(round(t_max / scheme.dt))
    if n_steps < 1:
        raise ValueError(f"t_max = {t_max} is shorter than one dt = {scheme.dt}")
    dumping = dump_path is not None
    if dumping and scheme.kind is SchemeKind.NONE:
        raise ValueError("an unmonitored ensemble has no record to dump")
    report_steps = report_grid(n_steps, n_grid)
    snap_steps = (np.arange(n_steps + 1, dtype=np.int64) if dumping
                  else report_steps)
    report_pos = np.searchsorted(snap_steps, report_steps)
    ns = report_steps.shape[0]
    dim = rho0.shape[0]
    half = n_traj // 2

    n_wrong = np.zeros(ns)
    hep_sum = np.zeros(ns)
    hep_sq = np.zeros(ns)
    sum_b = np.zeros((ns, dim * dim), dtype=np.complex128)
    sum_f = np.zeros((ns, dim * dim), dtype=np.complex128)
    sumsq_b = np.zeros((ns, dim * dim))
    sumsq_f = np.zeros((ns, dim * dim))
    watermark = [np.inf, 0.0]  # min eigenvalue, max |trace - 1|

    def fold(item, fh):
        nonlocal n_wrong, hep_sum, hep_sq, sum_b, sum_f, sumsq_b, sumsq_f
        i, true_q, snap_b, snap_f, ll_b, ll_f, record = item
        sb, sf = snap_b[report_pos], snap_f[report_pos]
        llb, llf = ll_b[report_pos], ll_f[report_pos]
        logit = llb - llf
        tie = np.abs(logit) <= TIE_LOGIT_TOL
        if true_q is Hypothesis.BOSE:
            wrong = logit < -TIE_LOGIT_TOL
        else:
            wrong = logit > TIE_LOGIT_TOL
        n_wrong += wrong.astype(np.float64) + 0.5 * tie.astype(np.float64)
        pb = expit(logit)
        rb = sb.reshape(ns, dim, dim)
        rf = sf.reshape(ns, dim, dim)
        diff = (1.0 - pb)[:, None, None] * rf - pb[:, None, None] * rb
        eigs = np.linalg.eigvalsh(np.concatenate((diff, rb, rf), axis=0))
        hep = 0.5 * (1.0 - np.abs(eigs[:ns]).sum(axis=1))
        hep_sum += hep
        hep_sq += hep * hep
        watermark[0] = min(watermark[0], float(eigs[ns:].min()))
        dev = max(np.abs(sb[:, :: dim + 1].sum(axis=1).real - 1.0).max(),
                  np.abs(sf[:, :: dim + 1].sum(axis=1).real - 1.0).max())
        watermark[1] = max(watermark[1], float(dev))
        if true_q is Hypothesis.BOSE:
            sum_b += sb
            sumsq_b += sb.real * sb.real + sb.imag * sb.imag
        else:
            sum_f += sf
            sumsq_f += sf.real * sf.real + sf.imag * sf.imag
        if fh is not None:
            post = expit(ll_b - ll_f)
            for s in range(1, snap_steps.shape[0]):
                fh.write(f"{i},{s},{fmt17(record[s - 1])},{fmt17(ll_b[s])},"
                         f"{fmt17(ll_f[s])},{fmt17(post[s])}\n")

    stream = iter_ensemble(params, scheme, rho0, n_steps, snap_steps, n_traj,
                           seed, workers=workers, noise_fn=noise_fn,
                           want_record=dumping, use_numba=use_numba)
    if dumping:
        with atomic_writer(dump_path) as fh:
            fh.write("trajectory,step,outcome,loglik_B,loglik_F,posterior_B\n")
            for item in stream:
                fold(item, fh)
    else:
        for item in stream:
            fold(item, None)

    p_cont = n_wrong / n_traj
    se_cont = np.sqrt(p_cont * (1.0 - p_cont) / n_traj)
    p_proj = hep_sum / n_traj
    var_h = np.maximum(hep_sq / n_traj - p_proj * p_proj, 0.0)
    se_proj = np.sqrt(var_h * (n_traj / (n_traj - 1.0)) / n_traj)

    bad = p_proj > p_cont + 3.0 * np.sqrt(se_cont ** 2 + se_proj ** 2) + 1e-12
    if np.any(bad):
        k = int(np.argmax(bad))
        raise RuntimeError(
            "projective-stage error exceeded the continuous-tag error beyond "
            f"3 combined standard errors at t = {report_steps[k] * scheme.dt}")

    mean_b = sum_b / half
    mean_f = sum_f / half
    var_ratio = half / (half - 1.0) if half > 1 else 1.0
    var_b = np.maximum(sumsq_b / half - np.abs(mean_b) ** 2, 0.0) * var_ratio
    var_f = np.maximum(sumsq_f / half - np.abs(mean_f) ** 2, 0.0) * var_ratio

    return DiscriminationReport(
        t_grid=report_steps * scheme.dt,
        p_err_cont=p_cont,
        se_cont=se_cont,
        p_err_cont_proj=p_proj,
        se_proj=se_proj,
        n_wrong=n_wrong,
        n_traj=n_traj,
        seed=int(seed),
        dt=scheme.dt,
        min_eigenvalue=watermark[0],
        max_trace_dev=watermark[1],
        mean_cond_true_B=mean_b.reshape(ns, dim, dim),
        mean_cond_true_F=mean_f.reshape(ns, dim, dim),
        se_fro_true_B=np.sqrt(var_b.sum(axis=1) / half),
        se_fro_true_F=np.sqrt(var_f.sum(axis=1) / half),
        wall_time=time.perf_counter() - t_start,
    )


def write_report_csv(report, path):
    """Serialize a DiscriminationReport to CSV (17 significant digits, atomic)."""
    lines = ["t,p_err_cont,se_cont,p_err_cont_proj,se_proj"]
    for k in range(report.t_grid.shape[0]):
        lines.append(",".join(fmt17(v) for v in (
            report.t_grid[k], report.p_err_cont[k], report.se_cont[k],
            report.p_err_cont_proj[k], report.se_proj[k])))
    atomic_write_text(path, "\n".join(lines) + "\n")
