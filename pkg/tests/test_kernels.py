"""Kernel-pair tests: numpy/numba agreement, determinism, env-flag dispatch."""

import os
import subprocess
import sys

import numpy as np
import pytest

from bathtag import _kernels, qcore
from bathtag.lindblad import ModelParams
from bathtag.monitor import MeasurementScheme, SchemeKind, iter_ensemble

DT = 1e-3


def _collect(scheme, rho0, n_steps, n_traj, seed, **kw):
    params = ModelParams.from_occupations(1.0, 1.0, kappa=1.0)
    snaps = np.array([0, n_steps // 2, n_steps], dtype=np.int64)
    out = []
    for item in iter_ensemble(params, scheme, rho0, n_steps, snaps,
                              n_traj, seed, want_record=True, **kw):
        out.append(item)
    return out


def test_hermitize_py():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    out = _kernels._hermitize_py(m.reshape(16).copy(), 4, 16).reshape(4, 4)
    assert np.allclose(out, 0.5 * (m + m.conj().T))


def test_warmup_smoke():
    _kernels.warmup(dim=2)
    _kernels.warmup(dim=4)


@pytest.mark.skipif(not _kernels._HAVE_NUMBA, reason="numba unavailable")
@pytest.mark.parametrize("kind,dim", [(SchemeKind.HOMODYNE, 4),
                                      (SchemeKind.PHOTODETECTION, 2)])
def test_numba_matches_numpy(kind, dim):
    """Same trajectories through both kernel implementations.

    The two paths use different matvec providers, so agreement is to
    round-off accumulation (measured ~1e-14 over 500 steps), not bitwise.
    """
    scheme = MeasurementScheme(kind, eta=0.8, dt=DT)
    rho0 = qcore.phi_plus_state() if dim == 4 else qcore.plus_state()
    a = _collect(scheme, rho0, 500, 4, seed=42, use_numba=True)
    b = _collect(scheme, rho0, 500, 4, seed=42, use_numba=False)
    assert len(a) == len(b) == 4
    for (i, qa, sba, sfa, lba, lfa, ra), (j, qb, sbb, sfb, lbb, lfb, rb) in zip(a, b):
        assert i == j and qa is qb
        assert np.abs(sba - sbb).max() < 1e-12
        assert np.abs(sfa - sfb).max() < 1e-12
        assert np.abs(lba - lbb).max() < 1e-12
        assert np.abs(lfa - lfb).max() < 1e-12
        if kind is SchemeKind.PHOTODETECTION:
            # click sequence is a branch decision; it may not differ at all
            assert np.array_equal(ra, rb)
        else:
            # measured signal dy + sqrt(eta kappa) <x> dt carries the filter
            # state's round-off through the drift term
            assert np.abs(ra - rb).max() < 1e-12


def test_worker_count_does_not_change_results():
    scheme = MeasurementScheme(SchemeKind.HOMODYNE, dt=DT)
    rho0 = qcore.phi_plus_state()
    seq = _collect(scheme, rho0, 200, 6, seed=7, workers=1)
    par = _collect(scheme, rho0, 200, 6, seed=7, workers=3)
    assert [x[0] for x in seq] == list(range(6))
    for a, b in zip(seq, par):
        assert a[0] == b[0] and a[1] is b[1]
        for x, y in zip(a[2:], b[2:]):
            assert np.array_equal(x, y)


def test_same_seed_same_output_different_seed_differs():
    # homodyne: the noise enters every step, so any seed change shows up
    scheme = MeasurementScheme(SchemeKind.HOMODYNE, dt=DT)
    rho0 = qcore.plus_state()
    a = _collect(scheme, rho0, 100, 2, seed=123)
    b = _collect(scheme, rho0, 100, 2, seed=123)
    c = _collect(scheme, rho0, 100, 2, seed=124)
    for x, y in zip(a, b):
        for u, v in zip(x[2:], y[2:]):
            assert np.array_equal(u, v)
    assert not np.array_equal(a[0][6], c[0][6])   # records differ
    assert not np.array_equal(a[0][4], c[0][4])   # and so do the logliks


def test_disable_flag_selects_numpy_path():
    code = ("import bathtag._kernels as k; "
            "assert not k.NUMBA_ENABLED; "
            "assert k.get_kernels(None)[0] is k._filter_pair_photodetection; "
            "k.warmup(); print('numpy path ok')")
    env = dict(os.environ, BATHTAG_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "numpy path ok" in out.stdout


def test_explicit_numba_request_overrides_disable_flag():
    if not _kernels._HAVE_NUMBA:
        pytest.skip("numba unavailable")
    pd, hd = _kernels.get_kernels(True)
    assert pd is not _kernels._filter_pair_photodetection
    assert hd is not _kernels._filter_pair_homodyne


def test_extreme_noise_stays_positive():
    """CP-exact stepping: even 80-sigma signals cannot break positivity.

    The POVM weights and filter traces are expectation values of positive
    operators, so the kernel's failure branches are unreachable through the
    public API for any record — that is the point of the Kraus construction.
    """
    params = ModelParams.from_occupations(1.0, 1.0, kappa=1.0)
    scheme = MeasurementScheme(SchemeKind.HOMODYNE, dt=DT)
    snaps = np.array([0, 50], dtype=np.int64)
    wild = lambda i, n: np.full(n, (-1.0) ** i * 80.0 * np.sqrt(DT))
    for item in iter_ensemble(params, scheme, qcore.plus_state(), 50, snaps,
                              2, 1, noise_fn=wild):
        rho = qcore.unvec(item[2][-1])
        assert np.linalg.eigvalsh(rho).min() > -1e-14
        assert np.isfinite(item[4]).all()


def _pd_status_args(t0b, t0f, f0b, track_lik):
    eye = np.eye(4, dtype=np.complex128)
    row = np.zeros(4, dtype=np.complex128)
    row[::3] = 1.0  # trace row for dim 2
    v0 = np.full(4, 0.5, dtype=np.complex128)
    snaps = np.array([0, 2], dtype=np.int64)
    uniforms = np.full(2, 0.5)
    return (t0b, eye, t0f, eye, f0b, row, row, row, 0.0 * row, v0, True,
            uniforms, snaps, True, track_lik)


@pytest.mark.parametrize("use_numba", [False, pytest.param(
    True, marks=pytest.mark.skipif(not _kernels._HAVE_NUMBA,
                                   reason="numba unavailable"))])
def test_kernel_status_codes(use_numba):
    """The defensive status plumbing, fed matrices the physics never produces."""
    pd, _ = _kernels.get_kernels(use_numba)
    eye = np.eye(4, dtype=np.complex128)
    row = np.zeros(4, dtype=np.complex128)
    row[::3] = 1.0
    assert pd(*_pd_status_args(-eye, eye, row, False))[-1] == 1
    assert pd(*_pd_status_args(eye, -eye, row, False))[-1] == 2
    assert pd(*_pd_status_args(eye, eye, -row, True))[-1] == 3
    assert pd(*_pd_status_args(eye, eye, row, True))[-1] == 0


def test_run_kernel_raises_on_bad_status(monkeypatch):
    """_run_kernel maps nonzero kernel status to a ValueError."""
    from bathtag import monitor

    def fake_get_kernels(use_numba=None):
        def bad_kernel(*args):
            out = _kernels._filter_pair_photodetection(*args)
            return out[:-1] + (3,)
        return bad_kernel, bad_kernel

    monkeypatch.setattr(monitor._kernels, "get_kernels", fake_get_kernels)
    params = ModelParams.from_occupations(1.0, 1.0, kappa=1.0)
    scheme = MeasurementScheme(SchemeKind.PHOTODETECTION, dt=DT)
    snaps = np.array([0, 5], dtype=np.int64)
    with pytest.raises(ValueError, match="nonpositive likelihood weight"):
        list(iter_ensemble(params, scheme, qcore.plus_state(), 5, snaps,
                           2, 1, use_numba=False))
