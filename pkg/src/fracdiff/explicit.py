"""Explicit Euler scheme and its CFL restriction.

The update is ``u^(n+1) = sgn(z) |z|^(1/(q-1))`` with
``z = (u^n)^(q-1) - dt D u^n``. It is only conditionally stable in the
porous-medium range, and always unstable close to extinction for ``q > 2``,
which is what the instability detector is for.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._newton_py import odd_power
from ._stepping import ScaledState, energy_check
from .implicit import Trajectory, _diagnose
from .kernel import Field, Kernel, weight_sum

__all__ = [
    "CflBound",
    "UnconditionallyUnstable",
    "cfl_max_dt",
    "run_explicit",
    "GROWTH_STEPS",
    "instability_detected",
]

# consecutive steps of sup-norm growth that count as an instability
GROWTH_STEPS = 3


class UnconditionallyUnstable(ValueError):
    """No stable time step exists: the diffusivity is singular near extinction for q >= 2."""


@dataclass(frozen=True)
class CflBound:
    """Largest stable step ``dt_max`` from the partial weight sum, plus the closed-form estimate."""

    dt_max: float
    dt_closed_form: float
    theta: float
    h: float
    q: float
    u0_sup: float

    @property
    def closed_form_over_h2theta(self) -> float:
        return self.dt_closed_form / self.h ** (2.0 * self.theta)


def cfl_max_dt(kernel: Kernel, q: float, u0_sup: float, M_x: int) -> CflBound:
    """``dt_max = (q-1)/2 u0_sup^(q-2) / sum_{j=1}^{M_x} w_j``.

    The closed-form estimate replaces the partial sum by half the full sum,
    which gives ``dt/h^(2 theta) <= (q-1) u0_sup^(q-2) / total_sum(h=1)``.
    """
    if q >= 2:
        raise UnconditionallyUnstable(
            f"q = {q} >= 2: the explicit scheme is unconditionally unstable near extinction"
        )
    if not q > 1:
        raise ValueError(f"q must exceed 1, got {q}")
    if not u0_sup > 0:
        raise ValueError("u0_sup must be positive")
    if M_x < 1:
        raise ValueError("M_x must be at least 1")
    if kernel.J < M_x:
        raise ValueError(f"kernel covers j <= {kernel.J}, need {M_x}")
    partial = float(np.sum(kernel.weights[1 : M_x + 1]))
    scale = (q - 1.0) * u0_sup ** (q - 2.0)
    dt_max = 0.5 * scale / partial
    closed = scale / weight_sum(kernel.theta, kernel.h)
    return CflBound(dt_max, closed, kernel.theta, kernel.h, q, u0_sup)


def _sign_oscillation(v: np.ndarray) -> bool:
    s = np.sign(v)
    s = s[s != 0]
    return bool(np.any(s[1:] != s[:-1]))


def run_explicit(kernel: Kernel, u0: Field, dt: float, q: float, n_steps: int, *, stop_on_instability: bool = False) -> Trajectory:
    """``n_steps`` explicit steps; diagnostics as for the implicit scheme.

    Flags recorded in ``Trajectory.flags`` as ``(n, reason)``:
    ``growth`` when the sup norm has grown for ``GROWTH_STEPS`` consecutive
    steps, ``sign`` when a nonnegative datum develops a sign change, and
    ``nonfinite`` when the state overflows (the run is then truncated).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = u0.grid
    D = kernel.matrix(grid)
    h = grid.h
    u = np.array(u0.values, dtype=float)
    nonneg = bool(np.all(u >= 0))
    state = ScaledState.from_values(u)
    log_scales = [state.log_scale]
    shapes = [state.shape]
    diags = [_diagnose(state, D, h, q)]
    flags = []
    growth = 0
    sup = np.max(np.abs(u), initial=0.0)
    seen = set()
    for n in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            z = odd_power(u, q - 1.0) - dt * (D @ u)
            u_new = odd_power(z, 1.0 / (q - 1.0))
        if not np.all(np.isfinite(u_new)):
            flags.append((n, "nonfinite"))
            break
        new = ScaledState.from_values(u_new)
        energy = energy_check(state, new, D, h, dt, q)
        diags.append(_diagnose(new, D, h, q, None, energy))
        log_scales.append(new.log_scale)
        shapes.append(new.shape)
        new_sup = np.max(np.abs(u_new), initial=0.0)
        growth = growth + 1 if new_sup > sup else 0
        if growth >= GROWTH_STEPS and "growth" not in seen:
            flags.append((n, "growth"))
            seen.add("growth")
        if nonneg and "sign" not in seen and _sign_oscillation(u_new):
            flags.append((n, "sign"))
            seen.add("sign")
        u, state, sup = u_new, new, new_sup
        if stop_on_instability and seen:
            break
    return Trajectory(grid, dt, q, np.array(log_scales), np.array(shapes), diags, "explicit", flags)


def instability_detected(traj: Trajectory) -> bool:
    return any(reason in ("growth", "sign", "nonfinite") for _, reason in traj.flags)
