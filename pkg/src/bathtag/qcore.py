"""Exact dense complex linear algebra for one and two qubits.

Basis convention (fixed across the whole package, see README):

* single qubit: index 0 = excited |1>, index 1 = ground |0>;
* two qubits:   probe is the FIRST tensor factor, memory the second, so the
  joint index is 2*i_probe + i_memory and, e.g., |11> sits at index 0 and
  |00> at index 3.

With this ordering sigma_- = [[0,0],[1,0]], sigma_+ = [[0,1],[0,0]] and the
probe Hamiltonian omega0 * sigma_+ sigma_- is diag(omega0, 0).

Everything here is a pure function over immutable ndarrays (complex128); all
dimensions are 2 or 4, so exact dense eigenroutines are used throughout.

Vectorization helpers use row-major (C-order) stacking, numpy's native
``reshape``: vec(A rho B) = kron(A, B^T) vec(rho) and Tr[X rho] =
vec(X^T) . vec(rho).
"""

import numpy as np

# tolerances shared by the validation helpers
HERM_ATOL = 1e-12     # max |A - A^dag| entry for a state to count as Hermitian
TRACE_ATOL = 1e-12
EIG_FLOOR = -1e-10    # smallest admissible eigenvalue of a density matrix

ID2 = np.eye(2, dtype=np.complex128)
ID4 = np.eye(4, dtype=np.complex128)

# |1> = (1,0), |0> = (0,1)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
SIGMA_X = SIGMA_MINUS + SIGMA_PLUS
NUMBER_OP = SIGMA_PLUS @ SIGMA_MINUS        # |1><1|, the excited projector


def _square(a, name="matrix"):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _same_dim(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

def excited_state():
    """|1><1| of the probe."""
    return np.diag([1.0, 0.0]).astype(np.complex128)


def ground_state():
    """|0><0| of the probe."""
    return np.diag([0.0, 1.0]).astype(np.complex128)


def plus_state():
    """(|1>+|0>)(<1|+<0|)/2 — handy for exercising coherences."""
    return np.full((2, 2), 0.5, dtype=np.complex128)


def phi_plus_state():
    """Maximally entangled probe+memory state (|11> + |00>)/sqrt(2) as a density matrix."""
    rho = np.zeros((4, 4), dtype=np.complex128)
    rho[0, 0] = rho[3, 3] = rho[0, 3] = rho[3, 0] = 0.5
    return rho


def maximally_mixed(dim):
    return np.eye(dim, dtype=np.complex128) / dim


def gibbs_state(beta_omega):
    """Thermal state of the probe: excited population e^{-b}/(1+e^{-b}), b = beta*omega0.

    beta_omega must be >= 0; values above 700 are capped (the state is |0><0|
    to machine precision long before that).
    """
    if not np.isfinite(beta_omega) or beta_omega < 0:
        raise ValueError(f"beta_omega must be finite and >= 0, got {beta_omega}")
    b = min(float(beta_omega), 700.0)
    w = np.exp(-b)
    p_exc = w / (1.0 + w)
    return np.diag([p_exc, 1.0 - p_exc]).astype(np.complex128)


def check_density_matrix(rho, name="rho"):
    """Enforce the density-matrix invariants; raises ValueError, returns rho.

    Hermitian within HERM_ATOL, unit trace within TRACE_ATOL, minimum
    eigenvalue >= EIG_FLOOR.
    """
    rho = _square(rho, name)
    asym = np.max(np.abs(rho - rho.conj().T))
    if asym > HERM_ATOL:
        raise ValueError(f"{name} is not Hermitian (max asymmetry {asym:.3e})")
    tr = rho.trace()
    if abs(tr - 1.0) > TRACE_ATOL:
        raise ValueError(f"{name} trace deviates from 1 by {abs(tr - 1.0):.3e}")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < EIG_FLOOR:
        raise ValueError(f"{name} has eigenvalue {lo:.3e} below {EIG_FLOOR}")
    return rho


# ---------------------------------------------------------------------------
# superoperators acting on matrices
# ---------------------------------------------------------------------------

def dissipator(theta, rho):
    """theta rho theta^dag - (theta^dag theta rho + rho theta^dag theta)/2."""
    theta = _square(theta, "theta")
    rho = _square(rho, "rho")
    _same_dim(theta, rho)
    td_t = theta.conj().T @ theta
    return theta @ rho @ theta.conj().T - 0.5 * (td_t @ rho + rho @ td_t)


def hsuperop(theta, rho):
    """theta rho + rho theta^dag - Tr[(theta^dag + theta) rho] rho.

    The traceless measurement-backaction superoperator; appears in the
    diffusive conditional equation and in tests only (the integrator works in
    Kraus form).
    """
    theta = _square(theta, "theta")
    rho = _square(rho, "rho")
    _same_dim(theta, rho)
    out = theta @ rho + rho @ theta.conj().T
    return out - np.trace((theta.conj().T + theta) @ rho) * rho


def trace_norm(a):
    """Sum of |eigenvalues| of a Hermitian matrix.

    Asymmetry up to HERM_ATOL is absorbed by symmetrization; anything larger is
    an error rather than silently masked.
    """
    a = _square(a, "a")
    asym = np.max(np.abs(a - a.conj().T))
    if asym > HERM_ATOL:
        raise ValueError(f"trace_norm needs a Hermitian matrix (asymmetry {asym:.3e})")
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T)))))


def tensor(a, b):
    """Kronecker product, probe factor first. Both inputs must be 2x2."""
    a = _square(a, "a")
    b = _square(b, "b")
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise ValueError("tensor only combines two single-qubit (2x2) operators")
    return np.kron(a, b)


def partial_trace(rho, keep):
    """Reduced 2x2 state of a 4x4 probe+memory operator.

    keep: 'probe' or 'memory'.
    """
    rho = _square(rho, "rho")
    if rho.shape != (4, 4):
        raise ValueError(f"partial_trace expects a 4x4 matrix, got {rho.shape}")
    r = rho.reshape(2, 2, 2, 2)  # (probe, memory, probe', memory')
    if keep == "probe":
        return np.einsum("ikjk->ij", r)
    if keep == "memory":
        return np.einsum("kikj->ij", r)
    raise ValueError(f"keep must be 'probe' or 'memory', got {keep!r}")


def lift_probe(op, dim):
    """Lift a 2x2 probe operator to the requested Hilbert space (op or op x Id)."""
    op = _square(op, "op")
    if dim == 2:
        return op
    if dim == 4:
        return np.kron(op, ID2)
    raise ValueError(f"dim must be 2 or 4, got {dim}")


# ---------------------------------------------------------------------------
# vectorization (row-major stacking)
# ---------------------------------------------------------------------------

def vec(rho):
    """Flatten a d x d matrix to length d^2 (row-major)."""
    return np.asarray(rho, dtype=np.complex128).reshape(-1).copy()


def unvec(v):
    d2 = v.shape[0]
    d = int(round(np.sqrt(d2)))
    if d * d != d2:
        raise ValueError(f"vector length {d2} is not a perfect square")
    return v.reshape(d, d).copy()


def sandwich_superop(a, b):
    """Matrix of rho -> a rho b under row-major vec: kron(a, b^T)."""
    return np.kron(a, b.T)


def left_superop(a):
    d = a.shape[0]
    return np.kron(a, np.eye(d, dtype=np.complex128))


def right_superop(b):
    d = b.shape[0]
    return np.kron(np.eye(d, dtype=np.complex128), b.T)


def dissipator_superop(theta):
    """Vectorized D[theta]."""
    tdt = theta.conj().T @ theta
    return (sandwich_superop(theta, theta.conj().T)
            - 0.5 * left_superop(tdt) - 0.5 * right_superop(tdt))


def hamiltonian_superop(h):
    """Vectorized -i[h, .]."""
    return -1j * (left_superop(h) - right_superop(h))


def trace_row(dim):
    """Row vector r with r @ vec(rho) = Tr[rho]."""
    r = np.zeros(dim * dim, dtype=np.complex128)
    r[:: dim + 1] = 1.0
    return r


def expect_row(x):
    """Row vector r with r @ vec(rho) = Tr[x rho]."""
    return np.asarray(x, dtype=np.complex128).T.reshape(-1).copy()
