"""Scaled implicit stepping shared by the decay and rescaled schemes.

States are carried as ``u = exp(log_scale) * shape`` with ``max|shape| = 1``.
Near extinction the fast-diffusion solution shrinks super-geometrically and
leaves the double range after a few dozen steps; in this representation the
Newton system always stays O(1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._newton_py import odd_power

ZERO_LOG = -math.inf


def safe_exp(x: float) -> float:
    """``exp`` saturating to 0 and inf instead of raising."""
    if x < -745.0:
        return 0.0
    if x > 709.0:
        return math.inf
    return math.exp(x)


class NewtonFailure(RuntimeError):
    """Raised when the nonlinear step solve does not converge."""

    def __init__(self, message, iterations, residual, status):
        super().__init__(f"{message} (iterations={iterations}, last relative update={residual:.3e})")
        self.iterations = iterations
        self.residual = residual
        self.status = status


@dataclass(frozen=True)
class ScaledState:
    log_scale: float
    shape: np.ndarray

    @classmethod
    def from_values(cls, values) -> "ScaledState":
        v = np.asarray(values, dtype=float)
        m = np.max(np.abs(v), initial=0.0)
        if m == 0.0:
            return cls(ZERO_LOG, np.zeros_like(v))
        return cls(math.log(m), v / m)

    @property
    def is_zero(self) -> bool:
        return self.log_scale == ZERO_LOG

    def values(self) -> np.ndarray:
        if self.is_zero:
            return np.zeros_like(self.shape)
        return math.exp(self.log_scale) * self.shape if self.log_scale > -745.2 else np.zeros_like(self.shape)

    def log_lq(self, q: float, h: float) -> float:
        if self.is_zero:
            return ZERO_LOG
        return self.log_scale + math.log(h * np.sum(np.abs(self.shape) ** q)) / q

    def log_xsq(self, D: np.ndarray, h: float) -> float:
        if self.is_zero:
            return ZERO_LOG
        e = h * float(self.shape @ (D @ self.shape))
        return 2.0 * self.log_scale + math.log(e) if e > 0 else ZERO_LOG


@dataclass(frozen=True)
class SolveInfo:
    iterations: int
    residual: float


class ScaledStepper:
    """Solves ``kappa u^(q-1) + dt D u = u_prev^(q-1)`` in scaled form.

    ``kappa = 1`` is the plain implicit Euler step; the rescaled scheme uses
    ``kappa = 1 - dt lambda_q / t0``.
    """

    def __init__(self, D, total_sum, dt, q, kappa=1.0, tol=1e-8, maxiter=100, solver=None):
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        if not q > 1:
            raise ValueError(f"q must exceed 1, got {q}")
        if not kappa > 0:
            raise ValueError("step too large for reaction term")
        self.D = np.asarray(D, dtype=float)
        self.S = float(total_sum)
        self.dt = float(dt)
        self.q = float(q)
        self.kappa = float(kappa)
        self.tol = tol
        self.maxiter = maxiter
        self.solve = solver or _backend.newton_solve

    def advance(self, prev: ScaledState) -> tuple[ScaledState, SolveInfo]:
        if prev.is_zero:
            return prev, SolveInfo(0, 0.0)
        q, dt = self.q, self.dt
        ls_p = prev.log_scale
        # expected magnitude: unchanged while the nonlinear term dominates,
        # ~ kappa u_prev^(q-1) / (dt S) once the linear term does. The two
        # regimes are kept separate so the right-hand side factor is formed
        # without cancelling huge logs.
        lin = (q - 2.0) * ls_p + math.log(self.kappa) - math.log(dt * self.S)
        if lin < 0.0:
            ls = ls_p + lin
            rhs_log = math.log(dt * self.S) - math.log(self.kappa)
        else:
            ls = ls_p
            rhs_log = (q - 2.0) * ls_p
        a = self.kappa * math.exp((q - 2.0) * ls) if (q - 2.0) * ls > -745.0 else 0.0
        b = math.exp(rhs_log) * odd_power(prev.shape, q - 1.0)
        ratio_log = ls_p - ls
        if ratio_log < 50.0:
            v0 = math.exp(ratio_log) * prev.shape
        else:
            # far into the linear regime; u_prev would be a poor guess of size e^50+
            v0 = np.linalg.solve(dt * self.D, b)
        # Jacobian regularization 1e-14 max(1, ||u_prev||_inf), in scaled units
        delta = 1e-14 * math.exp(min(max(0.0, ls_p) - ls, 700.0)) if q < 2 else 0.0
        v, iters, rel, status = self.solve(self.D, a, dt, b, v0, q, self.tol, self.maxiter, delta)
        if status != _backend.CONVERGED:
            what = "Jacobian not positive definite" if status == _backend.NOT_SPD else "Newton did not converge"
            raise NewtonFailure(what, iters, rel, status)
        m = np.max(np.abs(v))
        if m == 0.0 or not np.isfinite(m):
            raise NewtonFailure("Newton produced a degenerate iterate", iters, rel, status)
        return ScaledState(ls + math.log(m), v / m), SolveInfo(iters, rel)


@dataclass(frozen=True)
class EnergyCheck:
    """Relative excesses of the discrete energy inequalities (<= 0 means satisfied)."""

    fd1_lower: float
    fd1_upper: float
    fd2: float
    strict_decrease: bool

    @property
    def worst(self) -> float:
        return max(self.fd1_lower, self.fd1_upper, self.fd2)

    def ok(self, tol: float = 1e-8) -> bool:
        return self.strict_decrease and self.worst <= tol


def _log_excess(log_lhs: float, log_rhs: float) -> float:
    """Relative excess ``lhs/rhs - 1`` evaluated from logs."""
    if log_lhs == ZERO_LOG:
        return -1.0
    if log_rhs == ZERO_LOG:
        return math.inf
    return math.expm1(min(log_lhs - log_rhs, 700.0))


def energy_check(prev: ScaledState, cur: ScaledState, D, h, dt, q) -> EnergyCheck:
    """Checks the two discrete energy inequalities of one implicit step in log space.

    FD1: ``X_{n+1}^2 <= (1/q')(Q_n - Q_{n+1})/dt <= X_n^2`` with ``Q = ||u||_q^q``.
    FD2: ``(4/(q q')) ||u_{n+1}^{q/2} - u_n^{q/2}||^2 / dt^2 <= (X_n^2 - X_{n+1}^2) / (2 dt)``.
    """
    if prev.is_zero:
        return EnergyCheck(-1.0, -1.0, -1.0, True)
    qprime = q / (q - 1.0)
    Lp = prev.log_lq(q, h)
    L = cur.log_lq(q, h)
    Xp = prev.log_xsq(D, h)
    X = cur.log_xsq(D, h)
    drop = -math.expm1(q * (L - Lp)) if L != ZERO_LOG else 1.0
    strict = drop > 0
    if drop > 0:
        log_rate = q * Lp + math.log(drop) - math.log(qprime) - math.log(dt)
    else:
        log_rate = ZERO_LOG
    lower = _log_excess(log_rate, Xp)
    upper = _log_excess(X, log_rate) if log_rate != ZERO_LOG else math.inf
    # FD2 relative to the previous scale
    rho_log = cur.log_scale - prev.log_scale if not cur.is_zero else ZERO_LOG
    half = q / 2.0
    if rho_log == ZERO_LOG:
        diff = -odd_power(prev.shape, half)
    else:
        diff = safe_exp(half * rho_log) * odd_power(cur.shape, half) - odd_power(prev.shape, half)
    a_shape = h * float(diff @ diff)
    if not math.isfinite(a_shape):
        log_A = math.inf
    elif a_shape > 0:
        log_A = q * prev.log_scale + math.log(a_shape) + math.log(4.0 / (q * qprime)) - 2.0 * math.log(dt)
    else:
        log_A = ZERO_LOG
    xp_shape = h * float(prev.shape @ (D @ prev.shape))
    x_shape = h * float(cur.shape @ (D @ cur.shape)) if not cur.is_zero else 0.0
    rho2 = safe_exp(2.0 * rho_log) if rho_log != ZERO_LOG else 0.0
    gap = xp_shape - rho2 * x_shape
    if gap > 0 and math.isfinite(gap):
        log_B = 2.0 * prev.log_scale + math.log(gap) - math.log(2.0 * dt)
    else:
        log_B = ZERO_LOG
    fd2 = _log_excess(log_A, log_B) if not (log_A == ZERO_LOG and log_B == ZERO_LOG) else 0.0
    return EnergyCheck(fd1_lower=lower, fd1_upper=upper, fd2=fd2, strict_decrease=strict)
