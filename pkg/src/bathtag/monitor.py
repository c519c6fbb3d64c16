"""Stochastic trajectories and dual-hypothesis filtering for a monitored channel.

The auxiliary channel (jump operator ``c``, rate ``kappa``) is continuously
monitored with efficiency ``eta`` either by photodetection (click records
x_t in {0,1}) or by homodyne detection of the x-quadrature (real records
x_t = dy). Between detector readouts the probe keeps thermalizing under the
hypothesis generator.

Integration advances in discrete Kraus steps of length dt. For each outcome x
the state map is a single exactly completely-positive family

    rho~ = sum_k M_x^(k) rho M_x^(k)dag,       rho' = rho~ / Tr[rho~]

whose smooth member carries the full drift,
M_0 = 1 - (iH + G) dt [+ sqrt(eta kappa) c dy], with
G = (gamma_down sp sm + gamma_up sm sp + kappa c^dag c)/2, and whose jump
members are sqrt(gamma_down dt) sm, sqrt(gamma_up dt) sp and
sqrt((1-eta) kappa dt) c (the unmonitored fraction); a click applies
sqrt(eta kappa dt) c alone. Complete positivity at every step is what keeps
every conditional state a valid density matrix to round-off, including from
pure initial states where a literal Euler factor (1 + L dt) dips O(dt^2)
negative.

The per-step likelihood weight is the trace functional

    w_x(rho) = Tr[ S^(-1/2) E_x S^(-1/2) (rho + L rho dt) ],

where E_x = sum_k K_x^(k)dag K_x^(k) is the POVM element of the
monitored-channel Kraus family alone (the one kraus_photodetection /
kraus_homodyne return), L is the thermal generator, and
S = 1 + kappa^2 dt^2 (c^dag c)^2 / 4 is that family's completeness defect —
the same hypothesis-independent S for both detection schemes (for homodyne,
completeness is Gaussian-weighted over dy). The S-normalization makes the
outcome sum of w exactly one per step for every state and hypothesis, so the
product of w over steps is an exactly normalized record likelihood relative to
the counting measure (photodetection) or the Wiener measure (homodyne), while
agreeing with the raw functional Tr[sum_k K (rho + L rho dt) Kdag] to O(dt^2).
Exactness consequences: eta = 0 or kappa = 0 pins the posterior at 1/2 to
round-off, and sigma_x/2 photodetection (c^dag c = 1/4) has state- and
hypothesis-independent weights, so its records carry exactly zero information.
Both the state map and the weight coincide with an Euler step of the
conditional master equation to O(dt^2).

Everything downstream (single trajectories, ensembles, the brute-force
enumeration oracle in tagging) goes through one cached operator builder, so
all consumers apply bit-identical maps.
"""

import collections
import enum
import functools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels, qcore
from .lindblad import Hypothesis, generator_matrix

KAPPA_DT_GUARD = 0.05
_PHILOX_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


class SchemeKind(enum.Enum):
    PHOTODETECTION = "photodetection"
    HOMODYNE = "homodyne"
    NONE = "none"


@dataclass(frozen=True)
class MeasurementScheme:
    kind: SchemeKind
    eta: float = 1.0
    dt: float = 1e-3

    def __post_init__(self):
        if not isinstance(self.kind, SchemeKind):
            raise ValueError(f"kind must be a SchemeKind, got {self.kind!r}")
        if not (np.isfinite(self.eta) and 0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be > 0, got {self.dt}")


def check_guard(params, scheme):
    """Stability guard kappa*dt <= 0.05; raises ValueError when violated."""
    if params.kappa * scheme.dt > KAPPA_DT_GUARD:
        raise ValueError(
            f"kappa*dt = {params.kappa * scheme.dt:.3g} exceeds the guard "
            f"{KAPPA_DT_GUARD}; reduce dt")


# ---------------------------------------------------------------------------
# Kraus families of the monitored channel (as published interfaces)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KrausSet:
    """Outcome-indexed Kraus families {x: [M_x^(k)]} of the monitored channel."""
    families: dict

    def completeness_sum(self):
        """sum_{x,k} M^dag M; equals 1 + O(dt^2) with a scheme-dependent defect."""
        tot = None
        for ops in self.families.values():
            for m in ops:
                term = m.conj().T @ m
                tot = term if tot is None else tot + term
        return tot


def kraus_photodetection(params, scheme):
    """Click/no-click Kraus pair of the monitored channel (probe-space operators).

    outcome 0: {1 - (kappa/2) c^dag c dt, sqrt((1-eta) kappa dt) c}
    outcome 1: {sqrt(eta kappa dt) c}

    The no-click family keeps its (possibly zero) second element so the
    unmonitored fraction is always explicit. Completeness defect:
    kappa^2 (c^dag c)^2 dt^2 / 4.
    """
    if scheme.kind is not SchemeKind.PHOTODETECTION:
        raise ValueError(f"scheme kind must be photodetection, got {scheme.kind}")
    c = params.coupling.matrix
    k, dt, eta = params.kappa, scheme.dt, scheme.eta
    m0 = qcore.ID2 - 0.5 * k * dt * (c.conj().T @ c)
    leak = np.sqrt((1.0 - eta) * k * dt) * c
    m1 = np.sqrt(eta * k * dt) * c
    return KrausSet({0: [m0, leak], 1: [m1]})


def kraus_homodyne(params, scheme, dy):
    """Single-outcome Kraus family for a homodyne readout dy.

    {1 - (kappa/2) c^dag c dt + sqrt(eta kappa) c dy, sqrt((1-eta) kappa dt) c}

    Gaussian-weighted over dy ~ N(0, dt) this is complete to O(dt^2).
    """
    if scheme.kind is not SchemeKind.HOMODYNE:
        raise ValueError(f"scheme kind must be homodyne, got {scheme.kind}")
    c = params.coupling.matrix
    k, dt, eta = params.kappa, scheme.dt, scheme.eta
    m0 = qcore.ID2 - 0.5 * k * dt * (c.conj().T @ c) + np.sqrt(eta * k) * dy * c
    leak = np.sqrt((1.0 - eta) * k * dt) * c
    return KrausSet({0: [m0, leak]})


# ---------------------------------------------------------------------------
# precombined step operators (shared by step(), the kernels and the oracle)
# ---------------------------------------------------------------------------

def _cp_term(m):
    return np.kron(m, m.conj())


@dataclass(frozen=True)
class StepOperators:
    """Vectorized per-outcome maps for one (params, scheme, hypothesis, dim).

    t_mats: CP state-transition matrices (photodetection: no-click, click;
            homodyne: dy^0, dy^1, dy^2 coefficients; none: single map).
    f_rows: likelihood functionals, same indexing; w must come out positive.
    sample_row: functional of the true state driving the outcome draw
            (click probability incl. the eta*kappa*dt factor, or the
            deterministic part of dy incl. the dt factor).
    """
    t_mats: tuple
    f_rows: tuple
    sample_row: np.ndarray
    dim: int


@functools.lru_cache(maxsize=256)
def _step_operators(params, scheme, q, dim):
    if dim not in (2, 4):
        raise ValueError(f"dim must be 2 or 4, got {dim}")
    check_guard(params, scheme)
    kind, eta, dt = scheme.kind, scheme.eta, scheme.dt
    kappa = params.kappa
    g_down, g_up = params.thermal_rates(q)

    c = qcore.lift_probe(params.coupling.matrix, dim)
    cdc = c.conj().T @ c
    sm = qcore.lift_probe(qcore.SIGMA_MINUS, dim)
    sp = qcore.lift_probe(qcore.SIGMA_PLUS, dim)
    h = qcore.lift_probe(params.omega0 * qcore.NUMBER_OP, dim)
    eye = np.eye(dim, dtype=np.complex128)

    # exactly-CP state maps: full drift inside the smooth Kraus member
    g_tot = 0.5 * (g_down * (sp @ sm) + g_up * (sm @ sp) + kappa * cdc)
    m_smooth = eye - (1j * h + g_tot) * dt
    jump_terms = (g_down * dt * _cp_term(sm) + g_up * dt * _cp_term(sp))

    # likelihood functionals: POVM elements E_x of the monitored-channel
    # Kraus family, exactly normalized by the family's hypothesis-independent
    # completeness defect S, applied to the Euler-evolved state:
    #   w_x = Tr[ S^(-1/2) E_x S^(-1/2) (rho + L_thermal rho dt) ]
    # so that sum_x w_x = 1 per step, exactly.
    euler = (np.eye(dim * dim, dtype=np.complex128)
             + generator_matrix(params, q, dim, include_monitor=False) * dt)
    a_print = eye - 0.5 * kappa * dt * cdc  # Hermitian smooth member
    s_tot = eye + 0.25 * (kappa * dt) ** 2 * (cdc @ cdc)
    svals, svecs = np.linalg.eigh(s_tot)
    s_inv_half = (svecs * (1.0 / np.sqrt(svals))) @ svecs.conj().T

    def povm_row(e):
        return qcore.expect_row(s_inv_half @ e @ s_inv_half) @ euler

    if kind is SchemeKind.PHOTODETECTION:
        t0 = (_cp_term(m_smooth) + jump_terms
              + (1.0 - eta) * kappa * dt * _cp_term(c))
        t1 = eta * kappa * dt * _cp_term(c)
        f0 = povm_row(a_print @ a_print + (1.0 - eta) * kappa * dt * cdc)
        f1 = povm_row(eta * kappa * dt * cdc)
        sample_row = eta * kappa * dt * qcore.expect_row(cdc)
        t_mats, f_rows = (t0, t1), (f0, f1)
    elif kind is SchemeKind.HOMODYNE:
        b = np.sqrt(eta * kappa) * c
        t0 = (_cp_term(m_smooth) + jump_terms
              + (1.0 - eta) * kappa * dt * _cp_term(c))
        t1 = np.kron(m_smooth, b.conj()) + np.kron(b, m_smooth.conj())
        t2 = _cp_term(b)
        f0 = povm_row(a_print @ a_print + (1.0 - eta) * kappa * dt * cdc)
        f1 = povm_row(a_print @ b + b.conj().T @ a_print)
        f2 = povm_row(eta * kappa * cdc)
        sample_row = dt * qcore.expect_row(b + b.conj().T)
        t_mats, f_rows = (t0, t1, t2), (f0, f1, f2)
    elif kind is SchemeKind.NONE:
        t0 = _cp_term(m_smooth) + jump_terms + kappa * dt * _cp_term(c)
        t_mats = (t0,)
        f_rows = ()
        sample_row = np.zeros(dim * dim, dtype=np.complex128)
    else:  # pragma: no cover
        raise ValueError(f"unknown scheme kind {kind}")

    for m in t_mats:
        m.setflags(write=False)
    for f in f_rows:
        f.setflags(write=False)
    sample_row.setflags(write=False)
    return StepOperators(t_mats=t_mats, f_rows=f_rows,
                         sample_row=sample_row, dim=dim)


# ---------------------------------------------------------------------------
# single-step API
# ---------------------------------------------------------------------------

def step(params, q, scheme, rho, outcome):
    """One conditional update: returns (normalized state, log likelihood weight).

    outcome: 0/1 click bit (photodetection), real dy (homodyne), or None.
    Raises ValueError on a nonpositive trace/weight (dt too large, or an
    outcome that is impossible from this state).
    """
    rho = np.asarray(rho, dtype=np.complex128)
    ops = _step_operators(params, scheme, q, rho.shape[0])
    v = qcore.vec(rho)
    if scheme.kind is SchemeKind.PHOTODETECTION:
        x = int(outcome)
        if x not in (0, 1):
            raise ValueError(f"photodetection outcome must be 0 or 1, got {outcome}")
        w = float(np.dot(ops.f_rows[x], v).real)
        vnew = ops.t_mats[x] @ v
    elif scheme.kind is SchemeKind.HOMODYNE:
        dy = float(outcome)
        w = float((np.dot(ops.f_rows[0], v) + dy * np.dot(ops.f_rows[1], v)
                   + dy * dy * np.dot(ops.f_rows[2], v)).real)
        vnew = ops.t_mats[0] @ v + dy * (ops.t_mats[1] @ v) + dy * dy * (ops.t_mats[2] @ v)
    else:
        if outcome is not None:
            raise ValueError("scheme 'none' takes outcome None")
        w = 1.0
        vnew = ops.t_mats[0] @ v
    tr = float(vnew[:: rho.shape[0] + 1].sum().real)
    if tr <= 0.0 or w <= 0.0:
        raise ValueError(
            f"nonpositive step weight (trace {tr:.3e}, w {w:.3e}): "
            "dt too large or impossible outcome")
    out = qcore.unvec(vnew / tr)
    out = 0.5 * (out + out.conj().T)
    return out, float(np.log(w))


def sample_outcome(params, true_q, scheme, rho_true, rng):
    """Draw one detector outcome from the true-hypothesis conditional state."""
    rho_true = np.asarray(rho_true, dtype=np.complex128)
    ops = _step_operators(params, scheme, true_q, rho_true.shape[0])
    v = qcore.vec(rho_true)
    if scheme.kind is SchemeKind.PHOTODETECTION:
        p1 = float(np.dot(ops.sample_row, v).real)
        if p1 > 1.0:
            raise ValueError(f"click probability {p1} > 1: dt guard violated")
        return int(rng.random() < p1)
    if scheme.kind is SchemeKind.HOMODYNE:
        mean = float(np.dot(ops.sample_row, v).real)
        return mean + rng.standard_normal() * np.sqrt(scheme.dt)
    return None


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def trajectory_rng(seed, index):
    """Counter-based per-trajectory stream: Philox keyed by (seed, index)."""
    key = np.array([np.uint64(int(seed) & int(_PHILOX_MASK)), np.uint64(index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_noise(scheme, n_steps, rng):
    if scheme.kind is SchemeKind.HOMODYNE:
        return rng.standard_normal(n_steps) * np.sqrt(scheme.dt)
    if scheme.kind is SchemeKind.PHOTODETECTION:
        return rng.random(n_steps)
    return np.zeros(n_steps)


def _run_kernel(params, scheme, v0, true_q, noise, snap_steps,
                want_record=False, use_numba=None):
    """Drive one trajectory through the compiled (or numpy) kernel."""
    dim = int(round(np.sqrt(v0.shape[0])))
    ops_b = _step_operators(params, scheme, Hypothesis.BOSE, dim)
    ops_f = _step_operators(params, scheme, Hypothesis.FERMI, dim)
    ops_true = ops_b if true_q is Hypothesis.BOSE else ops_f
    pd_kernel, hd_kernel = _kernels.get_kernels(use_numba)
    true_is_b = true_q is Hypothesis.BOSE
    track_lik = scheme.kind is not SchemeKind.NONE
    if scheme.kind is SchemeKind.HOMODYNE:
        out = hd_kernel(*ops_b.t_mats, *ops_f.t_mats,
                        *ops_b.f_rows, *ops_f.f_rows,
                        ops_true.sample_row, v0, true_is_b,
                        noise, snap_steps, want_record, track_lik)
    else:
        zero = np.zeros_like(ops_b.t_mats[0])
        zrow = np.zeros(dim * dim, dtype=np.complex128)
        t1b = ops_b.t_mats[1] if track_lik else zero
        t1f = ops_f.t_mats[1] if track_lik else zero
        frows = ((*ops_b.f_rows, *ops_f.f_rows) if track_lik
                 else (zrow, zrow, zrow, zrow))
        out = pd_kernel(ops_b.t_mats[0], t1b, ops_f.t_mats[0], t1f,
                        *frows, ops_true.sample_row, v0, true_is_b,
                        noise, snap_steps, want_record, track_lik)
    snap_b, snap_f, ll_b, ll_f, record, status = out
    if status != 0:
        what = {1: "B-filter trace", 2: "F-filter trace", 3: "likelihood weight"}[status]
        raise ValueError(f"nonpositive {what} during trajectory: dt too large?")
    return snap_b, snap_f, ll_b, ll_f, record


@dataclass(frozen=True)
class TrajectoryResult:
    """One monitored trajectory with both hypothesis filters attached.

    record has length n_steps (None for the unmonitored scheme); the state /
    loglik / posterior timelines have length n_steps + 1 and include t = 0.
    """
    times: np.ndarray
    record: np.ndarray
    cond_B: np.ndarray
    cond_F: np.ndarray
    loglik_B: np.ndarray
    loglik_F: np.ndarray
    true_q: Hypothesis
    scheme: MeasurementScheme

    @property
    def posterior_B(self):
        # flat priors: P(B | record) = logistic(loglik_B - loglik_F)
        return 1.0 / (1.0 + np.exp(np.clip(self.loglik_F - self.loglik_B,
                                           -700.0, 700.0)))

    def step_index(self, t):
        i = int(round(t / self.scheme.dt))
        if not 0 <= i < self.times.shape[0]:
            raise ValueError(f"t = {t} outside the simulated range")
        return i


def run_trajectory(params, true_q, scheme, rho0, t, rng):
    """Simulate one record from the true hypothesis and filter both hypotheses.

    rng: an integer seed or a numpy Generator. Fixed seed => bit-identical
    output, independent of anything else in the process.
    """
    rho0 = qcore.check_density_matrix(rho0, "rho0")
    check_guard(params, scheme)
    if np.isscalar(rng):
        rng = trajectory_rng(int(rng), 0)
    n_steps = int(round(t / scheme.dt))
    if n_steps < 1:
        raise ValueError(f"t = {t} shorter than one step dt = {scheme.dt}")
    noise = _draw_noise(scheme, n_steps, rng)
    snap_steps = np.arange(n_steps + 1, dtype=np.int64)
    v0 = qcore.vec(rho0)
    snap_b, snap_f, ll_b, ll_f, record = _run_kernel(
        params, scheme, v0, true_q, noise, snap_steps, want_record=True)
    dim = rho0.shape[0]
    return TrajectoryResult(
        times=snap_steps * scheme.dt,
        record=None if scheme.kind is SchemeKind.NONE else record,
        cond_B=snap_b.reshape(-1, dim, dim),
        cond_F=snap_f.reshape(-1, dim, dim),
        loglik_B=ll_b,
        loglik_F=ll_f,
        true_q=true_q,
        scheme=scheme,
    )


def iter_ensemble(params, scheme, rho0, n_steps, snap_steps, n_traj, seed,
                  workers=None, noise_fn=None, want_record=False,
                  use_numba=None):
    """Yield per-trajectory filter outputs in trajectory-index order.

    Trajectory i draws its noise from Philox(key=(seed, i)) (or from
    noise_fn(i, n_steps), the hook the coupled dt-halving tests use) and is
    true-B for i < n_traj//2, true-F otherwise. Yields tuples
    (i, true_q, snap_b, snap_f, ll_b, ll_f, record). Execution may be
    parallel; the yield order never is, so any reduction run over this
    iterator is worker-count independent.
    """
    rho0 = qcore.check_density_matrix(rho0, "rho0")
    check_guard(params, scheme)
    if n_traj < 2 or n_traj % 2:
        raise ValueError(f"n_traj must be even and >= 2, got {n_traj}")
    v0 = qcore.vec(rho0)
    snap_steps = np.asarray(snap_steps, dtype=np.int64)
    half = n_traj // 2
    # build operators and trigger any jit compile once, in the calling thread
    for q in Hypothesis:
        _step_operators(params, scheme, q, rho0.shape[0])
    if use_numba or (use_numba is None and _kernels.NUMBA_ENABLED):
        _kernels.warmup()

    def task(i):
        true_q = Hypothesis.BOSE if i < half else Hypothesis.FERMI
        if noise_fn is None:
            noise = _draw_noise(scheme, n_steps, trajectory_rng(seed, i))
        else:
            noise = np.asarray(noise_fn(i, n_steps), dtype=np.float64)
        out = _run_kernel(params, scheme, v0, true_q, noise, snap_steps,
                          want_record=want_record, use_numba=use_numba)
        return (i, true_q) + out

    if workers is None:
        workers = max(1, os.cpu_count() or 1)
    if workers <= 1:
        for i in range(n_traj):
            yield task(i)
        return
    # bounded prefetch: in-order consumption without buffering the whole run
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = collections.deque()
        nxt = 0
        while nxt < n_traj or pending:
            while nxt < n_traj and len(pending) < 2 * workers:
                pending.append(pool.submit(task, nxt))
                nxt += 1
            yield pending.popleft().result()
