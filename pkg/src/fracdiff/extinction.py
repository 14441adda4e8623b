"""Extinction-time estimation for ``q > 2`` through the rescaled problem.

With a candidate time ``t0`` the solution is rescaled as
``v(s) = (t0/(t0 - t))^(1/(q-2)) u(t)``, ``s = t0 log(t0/(t0 - t))``, which
turns the equation into

    d_s v^(q-1) + D v = (lambda_q/t0) v^(q-1),   lambda_q = (q-1)/(q-2).

If ``t0`` underestimates the extinction time ``v`` eventually grows, if it
overestimates it ``v`` decays; two norm thresholds turn this into a
bisection on ``t0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._stepping import ScaledState, ScaledStepper
from .implicit import NEWTON_MAXITER, NEWTON_TOL, Trajectory, _diagnose
from .kernel import Field, Kernel
from .spaces import lq_norm, x_norm_sq

__all__ = [
    "Bracket",
    "RescaledRun",
    "DichotomyReport",
    "ConfigurationError",
    "init_bracket",
    "rescaled_step",
    "run_rescaled",
    "dichotomy",
    "horizon",
    "UPPER",
    "LOWER",
    "SURVIVED",
]

UPPER = "UpperBroken"
LOWER = "LowerBroken"
SURVIVED = "Survived"


class ConfigurationError(ValueError):
    """Inconsistent constants (for instance a C that is not a valid Poincare-Sobolev constant)."""


def _lam(q: float) -> float:
    if not q > 2:
        raise ValueError(f"finite-time extinction needs q > 2, got {q}")
    return (q - 1.0) / (q - 2.0)


@dataclass(frozen=True)
class Bracket:
    t1: float
    t2: float
    mu_h: float

    def __iter__(self):
        return iter((self.t1, self.t2, self.mu_h))


def init_bracket(kernel: Kernel, u0: Field, q: float, C: float) -> Bracket:
    """Initial bracket ``t1 <= t_* <= t2`` and the constant ``mu_h``.

    ``t1 = lambda_q (Q^2/X^2)(Q/2)^(q-2)``, ``t2 = lambda_q C^2 (2Q)^(q-2)`` and
    ``mu_h = 1/(1 - Q^2/(4^(q-2) C^2 X^2))`` with ``Q, X`` the l^q and energy
    norms of ``u0``; these satisfy ``mu_h (t2 - t1) = t2``.
    """
    lam = _lam(q)
    Q = lq_norm(u0, q)
    X2 = x_norm_sq(kernel, u0)
    if Q == 0:
        raise ValueError("u0 must not vanish")
    t1 = lam * (Q**2 / X2) * (0.5 * Q) ** (q - 2.0)
    t2 = lam * C**2 * (2.0 * Q) ** (q - 2.0)
    denom = 1.0 - Q**2 / (4.0 ** (q - 2.0) * C**2 * X2)
    if not denom > 0:
        raise ConfigurationError(f"mu_h denominator {denom} <= 0: C = {C} is too small for this datum")
    return Bracket(t1, t2, 1.0 / denom)


def _stepper(kernel, grid, ds, q, t0):
    lam = _lam(q)
    kappa = 1.0 - ds * lam / t0
    if not kappa > 0:
        raise ValueError(f"step too large for reaction term: ds lambda_q / t0 = {ds * lam / t0} >= 1")
    return ScaledStepper(kernel.matrix(grid), kernel.total_sum, ds, q, kappa=kappa, tol=NEWTON_TOL, maxiter=NEWTON_MAXITER)


def rescaled_step(kernel: Kernel, v_prev: Field, ds: float, q: float, t0: float) -> Field:
    """Solve ``(1 - ds lambda_q/t0) v^(q-1) + ds D v = v_prev^(q-1)``."""
    stepper = _stepper(kernel, v_prev.grid, ds, q, t0)
    new, _ = stepper.advance(ScaledState.from_values(v_prev.values))
    return Field(v_prev.grid, new.values())


@dataclass
class RescaledRun:
    """Outcome of one rescaled run; ``fired_step`` is the step at which a threshold fired."""

    t0: float
    ds: float
    outcome: str
    fired_step: int | None
    planned_steps: int
    horizon: float
    log_upper: float
    log_lower: float
    trajectory: Trajectory | None = None

    @property
    def states(self):
        return self.trajectory.states if self.trajectory is not None else []


def _thresholds(kernel, u0, q, t0, C):
    lam = _lam(q)
    Q = lq_norm(u0, q)
    X2 = x_norm_sq(kernel, u0)
    p = 1.0 / (q - 2.0)
    log_upper = math.log(2.0) + p * (math.log(t0 / lam) + math.log(X2) - 2.0 * math.log(Q))
    log_lower = -math.log(2.0) + p * (math.log(t0 / lam) - 2.0 * math.log(C))
    return log_upper, log_lower


def horizon(t0: float, mu_h: float, epsilon: float) -> float:
    """``S_t0 = t0 log(t0/((mu_h - 1) epsilon))``."""
    return t0 * math.log(t0 / ((mu_h - 1.0) * epsilon))


def run_rescaled(
    kernel: Kernel,
    u0: Field,
    q: float,
    t0: float,
    ds: float,
    C: float,
    epsilon: float,
    *,
    mu_h: float | None = None,
    keep_states: bool = True,
    n_steps: int | None = None,
    stop_on_threshold: bool = True,
) -> RescaledRun:
    """Run the rescaled scheme until a threshold fires or ``s`` reaches ``S_t0``.

    ``n_steps`` overrides the horizon (used when a fixed-length trajectory is
    wanted, e.g. for rate fitting); ``stop_on_threshold=False`` keeps going
    after a firing and records only the first one.
    """
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    grid = u0.grid
    if mu_h is None:
        mu_h = init_bracket(kernel, u0, q, C).mu_h
    S = horizon(t0, mu_h, epsilon)
    N = n_steps if n_steps is not None else max(1, math.ceil(S / ds))
    log_upper, log_lower = _thresholds(kernel, u0, q, t0, C)
    stepper = _stepper(kernel, grid, ds, q, t0)
    D, h = stepper.D, grid.h
    state = ScaledState.from_values(u0.values)
    if state.is_zero:
        raise ValueError("u0 must not vanish")
    log_scales = [state.log_scale]
    shapes = [state.shape]
    diags = [_diagnose(state, D, h, q)] if keep_states else []
    outcome, fired = SURVIVED, None
    for n in range(1, N + 1):
        state, info = stepper.advance(state)
        L = state.log_lq(q, h)
        if keep_states:
            log_scales.append(state.log_scale)
            shapes.append(state.shape)
            diags.append(_diagnose(state, D, h, q, info))
        if fired is None:
            if L >= log_upper:
                outcome, fired = UPPER, n
            elif L <= log_lower:
                outcome, fired = LOWER, n
            if fired is not None and stop_on_threshold:
                break
    traj = None
    if keep_states:
        traj = Trajectory(grid, ds, q, np.array(log_scales), np.array(shapes), diags, "rescaled")
    return RescaledRun(t0, ds, outcome, fired, N, S, log_upper, log_lower, traj)


@dataclass
class DichotomyReport:
    t_star: float
    bracket_history: list
    probes: int
    epsilon: float
    mu_h: float
    stopping_reason: str
    initial_bracket: Bracket = None
    final_bracket: tuple = None
    runs: list = field(default_factory=list)

    def as_record(self) -> dict:
        return {
            "t_star": self.t_star,
            "probes": self.probes,
            "epsilon": self.epsilon,
            "mu_h": self.mu_h,
            "stopping_reason": self.stopping_reason,
            "initial_bracket": [self.initial_bracket.t1, self.initial_bracket.t2],
            "final_bracket": list(self.final_bracket),
            "bracket_history": [
                {"t1": t1, "t2": t2, "t0": t0, "outcome": o, "fired_step": n}
                for (t1, t2, t0, o, n) in self.bracket_history
            ],
        }


def dichotomy(
    kernel: Kernel,
    u0: Field,
    q: float,
    ds: float,
    epsilon: float,
    C: float,
    *,
    max_probes: int = 200,
) -> DichotomyReport:
    """Bisect on ``t0`` until a probe survives to ``S_t0`` or the bracket is narrower than ``epsilon``."""
    br = init_bracket(kernel, u0, q, C)
    if not br.t1 < br.t2:
        raise ConfigurationError(f"initial bracket is empty: t1={br.t1}, t2={br.t2}")
    if not epsilon < br.t2 - br.t1:
        raise ValueError("epsilon must be smaller than the initial bracket width")
    t1, t2 = br.t1, br.t2
    history = []
    probes = 0
    reason = "BracketClosed"
    t_star = None
    while t2 - t1 >= epsilon:
        if probes >= max_probes:
            raise RuntimeError("dichotomy exceeded the probe budget")
        t0 = 0.5 * (t1 + t2)
        r = run_rescaled(kernel, u0, q, t0, ds, C, epsilon, mu_h=br.mu_h, keep_states=False)
        probes += 1
        history.append((t1, t2, t0, r.outcome, r.fired_step))
        if r.outcome == UPPER:
            t1 = t0
        elif r.outcome == LOWER:
            t2 = t0
        else:
            reason = SURVIVED
            t_star = t0
            break
    if t_star is None:
        t_star = 0.5 * (t1 + t2)
    return DichotomyReport(t_star, history, probes, epsilon, br.mu_h, reason, br, (t1, t2))
