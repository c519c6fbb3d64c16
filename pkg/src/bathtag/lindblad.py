"""Unconditional (deterministic) dynamics and closed-form steady-state analytics.

Two competing hypotheses about the thermal bath attached to the probe:

* BOSE  (sign +1): occupation N(beta) = 1/(e^{beta omega0} - 1)
* FERMI (sign -1): occupation N(beta) = 1/(e^{beta omega0} + 1)

Under hypothesis q the probe relaxes with rates gamma_down = gamma (1 + s_q N_q)
and gamma_up = gamma N_q; an auxiliary zero-temperature channel with jump
operator c (sigma_- or sigma_x/2) and rate kappa is optionally attached, and is
the channel that the monitor module unravels.

Generators act on the probe alone (2x2 states) or on probe(+)memory (4x4
states); the memory qubit is never acted on directly.

Propagation is by exact matrix exponential (scipy's scaling-and-squaring) of
the vectorized generator — generators are time independent and at most 16x16,
so this is exact to machine precision and serves as the oracle for the
stochastic module.
"""

import enum
import functools
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from . import qcore

BOSE_BETA_MIN = 1e-9   # Bose occupation diverges at beta = 0


class Hypothesis(enum.Enum):
    BOSE = "B"
    FERMI = "F"

    @property
    def sign(self):
        return 1.0 if self is Hypothesis.BOSE else -1.0


class Coupling(enum.Enum):
    """Jump operator of the auxiliary monitored channel."""
    SIGMA_MINUS = "sigma_minus"
    SIGMA_X_HALF = "sigma_x_half"

    @property
    def matrix(self):
        if self is Coupling.SIGMA_MINUS:
            return qcore.SIGMA_MINUS.copy()
        return 0.5 * qcore.SIGMA_X


def occupation(q, beta_omega):
    """Bose-Einstein / Fermi-Dirac factor 1/(e^{beta omega0} - s_q)."""
    b = float(beta_omega)
    if not np.isfinite(b):
        raise ValueError(f"beta_omega must be finite, got {b}")
    if q is Hypothesis.BOSE:
        if b < BOSE_BETA_MIN:
            raise ValueError(
                f"Bose occupation needs beta_omega >= {BOSE_BETA_MIN} (got {b}); "
                "use a large-but-finite occupation instead of beta = 0")
    elif b < 0:
        raise ValueError(f"beta_omega must be >= 0, got {b}")
    return 1.0 / (np.exp(b) - q.sign)


@dataclass(frozen=True)
class ModelParams:
    """Physics of a hypothesis pair.

    gamma, kappa are rates (gamma sets the unit of time in practice), omega0 a
    frequency, beta_omega_* the dimensionless inverse temperature of the bath
    under each hypothesis, coupling the auxiliary jump operator.
    """
    gamma: float = 1.0
    kappa: float = 0.0
    omega0: float = 0.0
    beta_omega_B: float = np.log(2.0)
    beta_omega_F: float = np.log(2.0)
    coupling: Coupling = Coupling.SIGMA_MINUS

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma}")
        if not (np.isfinite(self.kappa) and self.kappa >= 0):
            raise ValueError(f"kappa must be finite and >= 0, got {self.kappa}")
        if not (np.isfinite(self.omega0) and self.omega0 >= 0):
            raise ValueError(f"omega0 must be finite and >= 0, got {self.omega0}")
        if not isinstance(self.coupling, Coupling):
            raise ValueError(f"coupling must be a Coupling, got {self.coupling!r}")
        for q in Hypothesis:
            n = self.occupation(q)
            if not (np.isfinite(n) and n > 0):
                raise ValueError(f"occupation under {q} is {n}; beta_omega out of range")

    @classmethod
    def from_occupations(cls, n_b, n_f, **kwargs):
        """Build params from the Bose occupations of the two bath temperatures.

        n_q parametrizes the temperature as N_bose(beta_q) = n_q, i.e.
        beta_q = ln(1 + 1/n_q); the Fermi factor under F follows as
        n_f/(1 + 2 n_f).
        """
        if n_b <= 0 or n_f <= 0:
            raise ValueError("occupations must be positive")
        return cls(beta_omega_B=float(np.log1p(1.0 / n_b)),
                   beta_omega_F=float(np.log1p(1.0 / n_f)),
                   **kwargs)

    def beta_omega(self, q):
        return self.beta_omega_B if q is Hypothesis.BOSE else self.beta_omega_F

    def occupation(self, q):
        return occupation(q, self.beta_omega(q))

    def thermal_rates(self, q):
        """(gamma_down, gamma_up) for hypothesis q."""
        n = self.occupation(q)
        return self.gamma * (1.0 + q.sign * n), self.gamma * n

    def equal_temperatures(self):
        return abs(self.beta_omega_B - self.beta_omega_F) <= 1e-12 * max(
            self.beta_omega_B, self.beta_omega_F, 1.0)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=256)
def generator_matrix(params, q, dim, include_monitor=True):
    """Vectorized generator (d^2 x d^2, row-major stacking).

    include_monitor=False drops the kappa D[c] channel — that is the drift the
    measurement integrator uses between Kraus updates, since the monitored
    channel is carried by the Kraus operators themselves.
    """
    if dim not in (2, 4):
        raise ValueError(f"dim must be 2 or 4, got {dim}")
    g_down, g_up = params.thermal_rates(q)
    h = qcore.lift_probe(params.omega0 * qcore.NUMBER_OP, dim)
    sm = qcore.lift_probe(qcore.SIGMA_MINUS, dim)
    sp = qcore.lift_probe(qcore.SIGMA_PLUS, dim)
    gen = (qcore.hamiltonian_superop(h)
           + g_down * qcore.dissipator_superop(sm)
           + g_up * qcore.dissipator_superop(sp))
    if include_monitor and params.kappa > 0:
        c = qcore.lift_probe(params.coupling.matrix, dim)
        gen = gen + params.kappa * qcore.dissipator_superop(c)
    gen.setflags(write=False)
    return gen


def generator_apply(params, q, rho):
    """Extended generator applied to rho: -i[H,rho] + thermal dissipators + kappa D[c]."""
    rho = np.asarray(rho, dtype=np.complex128)
    gen = generator_matrix(params, q, rho.shape[0], include_monitor=True)
    return qcore.unvec(gen @ qcore.vec(rho))


def propagate(params, q, rho0, t):
    """exp(L_q t) rho0 by exact matrix exponential of the vectorized generator."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    rho0 = qcore.check_density_matrix(rho0, "rho0")
    gen = generator_matrix(params, q, rho0.shape[0], include_monitor=True)
    v = expm(gen * t) @ qcore.vec(rho0)
    out = qcore.unvec(v)
    out = 0.5 * (out + out.conj().T)          # absorb expm round-off
    return out / out.trace().real


# ---------------------------------------------------------------------------
# steady-state analytics
# ---------------------------------------------------------------------------

def _steady_rates(params, q):
    """(rate_down, rate_up, rate_x): channel rates entering the steady populations."""
    g_down, g_up = params.thermal_rates(q)
    if params.coupling is Coupling.SIGMA_MINUS:
        return g_down + params.kappa, g_up, 0.0
    return g_down, g_up, params.kappa


def steady_populations(params, q):
    """Excited-state population of the unique steady state under hypothesis q."""
    r_down, r_up, r_x = _steady_rates(params, q)
    return (r_up + r_x / 4.0) / (r_up + r_down + r_x / 2.0)


def steady_state(params, q):
    """Steady state as a 2x2 density matrix (coherences vanish identically)."""
    p = steady_populations(params, q)
    return np.diag([p, 1.0 - p]).astype(np.complex128)


def heat_flow(params, q):
    """Steady heat current into the auxiliary environment, in units of omega0.

    sigma_- coupling: kappa * p_q   (energy quanta leak to the cold channel);
    sigma_x/2 coupling: -(kappa/4) (1 - 2 p_q) (flows backwards below half
    inversion). Multiply by params.omega0 for the physical power.
    """
    p = steady_populations(params, q)
    if params.coupling is Coupling.SIGMA_MINUS:
        return params.kappa * p
    return -0.25 * params.kappa * (1.0 - 2.0 * p)


def hep_infinity(params):
    """Steady-state Helstrom error probability (1 - |p_B - p_F|)/2."""
    p_b = steady_populations(params, Hypothesis.BOSE)
    p_f = steady_populations(params, Hypothesis.FERMI)
    return 0.5 * (1.0 - abs(p_b - p_f))


@dataclass(frozen=True)
class SteadyStateReport:
    p_B: float
    p_F: float
    heat_flow_B: float
    heat_flow_F: float
    hep_infinity: float


def steady_report(params):
    return SteadyStateReport(
        p_B=steady_populations(params, Hypothesis.BOSE),
        p_F=steady_populations(params, Hypothesis.FERMI),
        heat_flow_B=heat_flow(params, Hypothesis.BOSE),
        heat_flow_F=heat_flow(params, Hypothesis.FERMI),
        hep_infinity=hep_infinity(params),
    )


def kappa_best(params):
    """Coupling minimizing hep_infinity at equal temperatures.

    sigma_-: gamma sqrt(2 N_B + 1); sigma_x/2: twice that.
    """
    if not params.equal_temperatures():
        raise ValueError("kappa_best applies only at equal temperatures")
    n = occupation(Hypothesis.BOSE, params.beta_omega_B)
    k = params.gamma * np.sqrt(2.0 * n + 1.0)
    if params.coupling is Coupling.SIGMA_X_HALF:
        k *= 2.0
    return float(k)


def kappa_critical(params):
    """Coupling at which the steady populations coincide (p_B = p_F), or None.

    At kappa_c the steady states are identical and discrimination dies:
    hep_infinity(kappa_c) = 1/2 (verified internally to 1e-10). For the
    sigma_- coupling, with n_q the Bose occupation at beta_q,
    kappa_c = gamma (n_F - n_B)/(n_B (1 + 2 n_F) - n_F); for sigma_x/2 the
    population equality is linear in kappa and solves to
    kappa_c = 2 gamma (N_B - N_F (2 N_B + 1))/N_F with N_B the Bose and N_F the
    Fermi occupation. Returned only when positive and finite.
    """
    g = params.gamma
    if params.coupling is Coupling.SIGMA_MINUS:
        n_b = occupation(Hypothesis.BOSE, params.beta_omega_B)
        n_f = occupation(Hypothesis.BOSE, params.beta_omega_F)
        den = n_b * (1.0 + 2.0 * n_f) - n_f
        if den == 0:
            return None
        k = g * (n_f - n_b) / den
    else:
        n_b = occupation(Hypothesis.BOSE, params.beta_omega_B)
        n_f = occupation(Hypothesis.FERMI, params.beta_omega_F)
        k = 2.0 * g * (n_b - n_f * (2.0 * n_b + 1.0)) / n_f
    if not np.isfinite(k) or k <= 0:
        return None
    check = hep_infinity(replace(params, kappa=float(k)))
    if abs(check - 0.5) > 1e-10:  # pragma: no cover - guards algebra regressions
        raise AssertionError(f"critical coupling self-check failed: hep = {check}")
    return float(k)


def hep_at(params, rho0, t):
    """Helstrom error probability between the two propagated hypotheses at time t."""
    rho_b = propagate(params, Hypothesis.BOSE, rho0, t)
    rho_f = propagate(params, Hypothesis.FERMI, rho0, t)
    return 0.5 * (1.0 - 0.5 * qcore.trace_norm(rho_b - rho_f))


def hep_curve(params, rho0, times):
    """hep_at evaluated on a grid of times (convenience for reports/tests)."""
    return np.array([hep_at(params, rho0, float(t)) for t in times])
