"""Hot trajectory loops: dual-hypothesis filtering, one call per trajectory.

Two implementations of the same source functions:

* numba ``@njit(cache=True, nogil=True)`` — the default; ``nogil`` lets a
  thread pool run trajectories in parallel.
* the plain-python/numpy originals — selected by setting the environment
  variable ``BATHTAG_DISABLE_NUMBA=1`` before import (or explicitly via
  ``get_kernels(use_numba=False)``), and used as the reference in the
  equivalence tests and the benchmark.

``fastmath`` stays off: results must be bit-reproducible and independent of
the worker count, so the float op order is fixed.

Everything is vectorized (row-major) linear algebra on length-d^2 complex
state vectors:

  state update   v' = T_x v           (T_x: exactly-CP Kraus map per outcome)
  likelihood     w  = Re(f_x . v)     (f_x: per-outcome trace functional)
  trace          tr = sum v[k*(d+1)]

then normalize v'/tr and re-hermitize. The per-step weight w is accumulated in
log domain for both hypothesis filters; outcomes are sampled from the
true-hypothesis filter (photodetection: click ~ Bernoulli(Re(click_row . v));
homodyne: dy = Re(quad_row . v) + dW).

Status codes: 0 ok, 1/2 nonpositive trace in the B/F filter, 3 nonpositive
likelihood weight (dt too large or an impossible outcome).
"""

import os

import numpy as np

try:
    import numba
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

NUMBA_DISABLED = os.environ.get("BATHTAG_DISABLE_NUMBA", "") not in ("", "0")
NUMBA_ENABLED = _HAVE_NUMBA and not NUMBA_DISABLED


def _hermitize_py(v, d, d2):
    m = v.copy().reshape((d, d))
    m = 0.5 * (m + np.conj(m.T))
    return m.copy().reshape(d2)


# rebound to the jitted version below when numba is active, so the kernels
# (which resolve it as a global at compile time) can call it in nopython mode
_hermitize = _hermitize_py


def _filter_pair_photodetection(t0b, t1b, t0f, t1f,
                                f0b, f1b, f0f, f1f,
                                click_row, v0, true_is_b,
                                uniforms, snap_steps, want_record, track_lik):
    n = uniforms.shape[0]
    d2 = v0.shape[0]
    d = 2 if d2 == 4 else 4
    ns = snap_steps.shape[0]
    snap_b = np.zeros((ns, d2), dtype=np.complex128)
    snap_f = np.zeros((ns, d2), dtype=np.complex128)
    ll_b_out = np.zeros(ns)
    ll_f_out = np.zeros(ns)
    record = np.zeros(n if want_record else 1)
    vb = v0.copy()
    vf = v0.copy()
    llb = 0.0
    llf = 0.0
    status = 0
    ptr = 0
    while ptr < ns and snap_steps[ptr] == 0:
        snap_b[ptr] = vb
        snap_f[ptr] = vf
        ptr += 1
    for i in range(n):
        vt = vb if true_is_b else vf
        p1 = np.dot(click_row, vt).real
        click = uniforms[i] < p1
        if want_record:
            record[i] = 1.0 if click else 0.0
        if track_lik:
            wb = np.dot(f1b if click else f0b, vb).real
            wf = np.dot(f1f if click else f0f, vf).real
            if wb <= 0.0 or wf <= 0.0:
                status = 3
                break
            llb += np.log(wb)
            llf += np.log(wf)
        vb = np.dot(t1b if click else t0b, vb)
        trb = vb[:: d + 1].sum().real
        if trb <= 0.0:
            status = 1
            break
        vb = _hermitize(vb / trb, d, d2)
        vf = np.dot(t1f if click else t0f, vf)
        trf = vf[:: d + 1].sum().real
        if trf <= 0.0:
            status = 2
            break
        vf = _hermitize(vf / trf, d, d2)
        k = i + 1
        while ptr < ns and snap_steps[ptr] == k:
            snap_b[ptr] = vb
            snap_f[ptr] = vf
            ll_b_out[ptr] = llb
            ll_f_out[ptr] = llf
            ptr += 1
    return snap_b, snap_f, ll_b_out, ll_f_out, record, status


def _filter_pair_homodyne(t0b, t1b, t2b, t0f, t1f, t2f,
                          f0b, f1b, f2b, f0f, f1f, f2f,
                          quad_row, v0, true_is_b,
                          dws, snap_steps, want_record, track_lik):
    n = dws.shape[0]
    d2 = v0.shape[0]
    d = 2 if d2 == 4 else 4
    ns = snap_steps.shape[0]
    snap_b = np.zeros((ns, d2), dtype=np.complex128)
    snap_f = np.zeros((ns, d2), dtype=np.complex128)
    ll_b_out = np.zeros(ns)
    ll_f_out = np.zeros(ns)
    record = np.zeros(n if want_record else 1)
    vb = v0.copy()
    vf = v0.copy()
    llb = 0.0
    llf = 0.0
    status = 0
    ptr = 0
    while ptr < ns and snap_steps[ptr] == 0:
        snap_b[ptr] = vb
        snap_f[ptr] = vf
        ptr += 1
    for i in range(n):
        vt = vb if true_is_b else vf
        dy = np.dot(quad_row, vt).real + dws[i]
        dy2 = dy * dy
        if want_record:
            record[i] = dy
        if track_lik:
            wb = (np.dot(f0b, vb) + dy * np.dot(f1b, vb) + dy2 * np.dot(f2b, vb)).real
            wf = (np.dot(f0f, vf) + dy * np.dot(f1f, vf) + dy2 * np.dot(f2f, vf)).real
            if wb <= 0.0 or wf <= 0.0:
                status = 3
                break
            llb += np.log(wb)
            llf += np.log(wf)
        vb = np.dot(t0b, vb) + dy * np.dot(t1b, vb) + dy2 * np.dot(t2b, vb)
        trb = vb[:: d + 1].sum().real
        if trb <= 0.0:
            status = 1
            break
        vb = _hermitize(vb / trb, d, d2)
        vf = np.dot(t0f, vf) + dy * np.dot(t1f, vf) + dy2 * np.dot(t2f, vf)
        trf = vf[:: d + 1].sum().real
        if trf <= 0.0:
            status = 2
            break
        vf = _hermitize(vf / trf, d, d2)
        k = i + 1
        while ptr < ns and snap_steps[ptr] == k:
            snap_b[ptr] = vb
            snap_f[ptr] = vf
            ll_b_out[ptr] = llb
            ll_f_out[ptr] = llf
            ptr += 1
    return snap_b, snap_f, ll_b_out, ll_f_out, record, status


if NUMBA_ENABLED:
    _jit = numba.njit(cache=True, nogil=True)
    _hermitize = _jit(_hermitize_py)
    filter_pair_photodetection = _jit(_filter_pair_photodetection)
    filter_pair_homodyne = _jit(_filter_pair_homodyne)
else:
    filter_pair_photodetection = _filter_pair_photodetection
    filter_pair_homodyne = _filter_pair_homodyne


def get_kernels(use_numba=None):
    """(photodetection, homodyne) kernel pair; use_numba=None picks the default."""
    if use_numba is None:
        return filter_pair_photodetection, filter_pair_homodyne
    if use_numba:
        if not _HAVE_NUMBA:
            raise RuntimeError("numba is not importable in this environment")
        global _COMPILED, _hermitize
        if "_COMPILED" not in globals() or _COMPILED is None:
            jit = numba.njit(cache=True, nogil=True)
            _hermitize = jit(_hermitize_py)
            _COMPILED = (jit(_filter_pair_photodetection), jit(_filter_pair_homodyne))
        return _COMPILED
    return _filter_pair_photodetection, _filter_pair_homodyne


_COMPILED = (filter_pair_photodetection, filter_pair_homodyne) if NUMBA_ENABLED else None


def warmup(dim=2):
    """Trigger jit compilation on a tiny workload (no-op on the numpy path)."""
    d2 = dim * dim
    eye = np.eye(d2, dtype=np.complex128)
    row = np.zeros(d2, dtype=np.complex128)
    row[:: dim + 1] = 1.0
    v0 = np.zeros(d2, dtype=np.complex128)
    v0[-1] = 1.0
    snaps = np.array([0, 2], dtype=np.int64)
    u = np.full(2, 2.0)
    filter_pair_photodetection(eye, eye, eye, eye, row, row, row, row,
                               0.0 * row, v0, True, u, snaps, True, True)
    filter_pair_homodyne(eye, 0 * eye, 0 * eye, eye, 0 * eye, 0 * eye,
                         row, 0 * row, 0 * row, row, 0 * row, 0 * row,
                         0.0 * row, v0, False, np.zeros(2), snaps, False, True)
