import sys

import numpy as np
import pytest

from bathtag import qcore
from bathtag.lindblad import Coupling, ModelParams


def random_density(dim, rng, pure=False):
    """Random density matrix: Haar-ish pure state or a Wishart-type mixed state."""
    if pure:
        ket = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        ket /= np.linalg.norm(ket)
        return np.outer(ket, ket.conj())
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_matrix(dim, rng):
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


@pytest.fixture(params=[c for c in Coupling], ids=[c.value for c in Coupling])
def coupling(request):
    return request.param


@pytest.fixture
def params_equal():
    """Equal temperatures (occupation 1 under the Bose convention), kappa = gamma."""
    return ModelParams.from_occupations(1.0, 1.0, gamma=1.0, kappa=1.0)


@pytest.fixture
def params_unequal():
    return ModelParams.from_occupations(1.0, 2.0, gamma=1.0, kappa=1.0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-criteria verdict lines even when capture is on."""
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
