"""Decay envelopes and extinction bounds for the implicit scheme, and trajectory audits.

All quantities refer to ``||u^n||_q``. With ``K = C^-2 (2 - q)/(q - 1)``:

* ``b_n = (||u0||^(q-2) + K n dt)_+^(1/(q-2))``, the discrete analogue of the
  continuous upper envelope;
* ``a_n``, the root of ``a^(q-2) = ||u0||^(q-2) + K n dt (a^2/||u0||^2)^(1/n)``,
  which bounds every implicit trajectory from above;
* the lower curve built on the initial Rayleigh quotient ``R0`` instead of
  ``C^-2``;
* for ``q > 2``, ``T* = lambda_q C^2 ||u0||^(q-2)`` and the super-geometric
  bound ``||u^n|| <= ||u0|| (T*/(n dt))^(n/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EnvelopeParams",
    "AuditReport",
    "upper_envelope_bn",
    "lower_envelope",
    "solve_an",
    "log_an",
    "t_star_upper",
    "extinction_geometric_bound",
    "log_extinction_geometric_bound",
    "params_for",
    "audit_trajectory",
    "BOUND_RTOL",
]

# relative slack for the hard a_n bound (C itself is only known to ~1e-12)
BOUND_RTOL = 1e-8


@dataclass(frozen=True)
class EnvelopeParams:
    q: float
    C: float
    R0: float
    u0_lq: float
    dt: float

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.u0_lq > 0:
            raise ValueError("||u0||_q must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.q == 2:
            raise ValueError("envelopes are undefined for q = 2")
        if self.R0 < self.C**-2 * (1 - 1e-9):
            raise ValueError(f"R0 = {self.R0} is below C^-2 = {self.C**-2}; C is not a valid constant")

    @property
    def K(self) -> float:
        return self.C**-2 * (2.0 - self.q) / (self.q - 1.0)

    @property
    def lam(self) -> float:
        return (self.q - 1.0) / (self.q - 2.0)


def _positive_power(inner: float, q: float) -> float:
    if inner <= 0.0:
        return 0.0
    return inner ** (1.0 / (q - 2.0))


def upper_envelope_bn(params: EnvelopeParams, n: int) -> float:
    p = params
    return _positive_power(p.u0_lq ** (p.q - 2.0) + p.K * n * p.dt, p.q)


def lower_envelope(params: EnvelopeParams, n: int) -> float:
    p = params
    inner = p.u0_lq ** (p.q - 2.0) + (2.0 - p.q) / (p.q - 1.0) * p.R0 * n * p.dt
    return _positive_power(inner, p.q)


def _an_residual(p: EnvelopeParams, n: int, log_a: float) -> float:
    """``a^(q-2) - rhs(a)``; increasing in ``log a`` for q > 2, decreasing for q < 2."""
    log_u = math.log(p.u0_lq)
    lhs = math.exp((p.q - 2.0) * log_a)
    rhs = math.exp((p.q - 2.0) * log_u) + p.K * n * p.dt * math.exp(2.0 * (log_a - log_u) / n)
    return lhs - rhs


def log_an(params: EnvelopeParams, n: int, rtol: float = 1e-12) -> float:
    """Natural log of ``a_n``, found by bisection in ``log a``."""
    p = params
    if n < 1:
        raise ValueError("a_n is defined for n >= 1")
    hi = math.log(p.u0_lq)
    f_hi = _an_residual(p, n, hi)
    b = upper_envelope_bn(p, n)
    if p.q < 2:
        # b_n <= a_n <= ||u0||: residual is positive at b_n and negative at ||u0||
        lo = math.log(b)
        if not f_hi <= 0:
            raise ArithmeticError("bracket failure at ||u0||")
        sign_lo = 1.0
    else:
        if not f_hi >= 0:
            raise ArithmeticError("bracket failure at ||u0||")
        if b > 0:
            lo = math.log(b)
        else:
            # below T*: walk down until the residual turns negative
            lo = hi - 1.0
            step = 1.0
            while _an_residual(p, n, lo) >= 0:
                step *= 2.0
                lo = hi - step
                if step > 1e8:
                    raise ArithmeticError("bracket failure: a_n below representable range")
        sign_lo = -1.0
    f_lo = _an_residual(p, n, lo)
    if f_lo == 0.0:
        return lo
    if math.copysign(1.0, f_lo) != sign_lo:
        raise ArithmeticError("bracket failure: no sign change across the bracket")
    while hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        fm = _an_residual(p, n, mid)
        if fm == 0.0:
            return mid
        if math.copysign(1.0, fm) == sign_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_an(params: EnvelopeParams, n: int) -> float:
    """``a_n`` to relative accuracy 1e-12 (may underflow to 0 for q > 2; see :func:`log_an`)."""
    return math.exp(log_an(params, n))


def t_star_upper(params: EnvelopeParams) -> float:
    p = params
    if p.q <= 2:
        raise ValueError("finite extinction requires q > 2")
    return p.lam * p.C**2 * p.u0_lq ** (p.q - 2.0)


def log_extinction_geometric_bound(params: EnvelopeParams, n: int) -> float:
    if params.q <= 2:
        raise ValueError("requires q > 2")
    if n < 1:
        raise ValueError("requires n >= 1")
    return math.log(params.u0_lq) + 0.5 * n * (math.log(t_star_upper(params)) - math.log(n * params.dt))


def extinction_geometric_bound(params: EnvelopeParams, n: int) -> float:
    return math.exp(log_extinction_geometric_bound(params, n))


def params_for(kernel, u0, q: float, dt: float, C: float | None = None) -> EnvelopeParams:
    """Envelope parameters for an initial field, computing the optimal C if not given."""
    from .spaces import lq_norm, rayleigh
    from .stationary import optimal_constant

    if C is None:
        C = optimal_constant(kernel, q, grid=u0.grid)
    return EnvelopeParams(q=q, C=C, R0=rayleigh(kernel, u0, q), u0_lq=lq_norm(u0, q), dt=dt)


@dataclass
class AuditReport:
    """Per-step audit of an implicit trajectory against the envelopes.

    Hard checks: ``||u^n|| <= a_n`` and the energy inequalities. The excess
    over ``b_n``, the lower-curve violations and Rayleigh increases are
    reported only.
    """

    n: np.ndarray
    t: np.ndarray
    lq_norm: np.ndarray
    log_lq_norm: np.ndarray
    a_n: np.ndarray
    log_a_n: np.ndarray
    b_n: np.ndarray
    lower: np.ndarray
    rayleigh: np.ndarray
    flags: list
    an_violations: list = field(default_factory=list)
    energy_violations: list = field(default_factory=list)
    lower_violations: list = field(default_factory=list)
    rayleigh_increases: list = field(default_factory=list)
    bn_excess: float = 0.0
    geometric_violations: list = field(default_factory=list)

    @property
    def hard_ok(self) -> bool:
        return not self.an_violations and not self.energy_violations

    def summary(self) -> dict:
        return {
            "hard_ok": self.hard_ok,
            "an_violations": len(self.an_violations),
            "energy_violations": len(self.energy_violations),
            "lower_violations": len(self.lower_violations),
            "rayleigh_increases": len(self.rayleigh_increases),
            "bn_excess": self.bn_excess,
            "geometric_violations": len(self.geometric_violations),
        }


def audit_trajectory(traj, params: EnvelopeParams | None, q: float, *, rayleigh_rtol: float = 1e-12) -> AuditReport:
    """Audit an implicit trajectory; never raises on a failed check."""
    from .implicit import ENERGY_TOL

    N = traj.n_states
    n = np.arange(N)
    t = traj.times
    log_lq = traj.log_lq_norms
    with np.errstate(under="ignore"):
        lq = np.exp(log_lq)
    ray = traj.rayleighs
    log_a = np.full(N, np.nan)
    a = np.full(N, np.nan)
    b = np.full(N, np.nan)
    low = np.full(N, np.nan)
    flags = [[] for _ in range(N)]
    rep = AuditReport(n, t, lq, log_lq, a, log_a, b, low, ray, flags)
    zero = not np.isfinite(log_lq[0])
    if zero or params is None:
        return rep
    for k in range(N):
        b[k] = upper_envelope_bn(params, k)
        low[k] = lower_envelope(params, k)
        if k >= 1:
            log_a[k] = log_an(params, k)
            a[k] = math.exp(log_a[k]) if log_a[k] > -745 else 0.0
            if log_lq[k] > log_a[k] + math.log1p(BOUND_RTOL):
                rep.an_violations.append(k)
                flags[k].append("an")
            if q > 2:
                g = log_extinction_geometric_bound(params, k)
                if log_lq[k] > g + math.log1p(BOUND_RTOL):
                    rep.geometric_violations.append(k)
                    flags[k].append("geometric")
            d = traj.diagnostics[k]
            if d.energy is not None and not d.energy.ok(ENERGY_TOL):
                rep.energy_violations.append(k)
                flags[k].append("energy")
            if ray[k] > ray[k - 1] * (1.0 + rayleigh_rtol):
                rep.rayleigh_increases.append(k)
                flags[k].append("rayleigh")
        if lq[k] < low[k] * (1.0 - 1e-12):
            rep.lower_violations.append(k)
            flags[k].append("lower")
        rep.bn_excess = max(rep.bn_excess, float(lq[k] - b[k]))
    return rep
