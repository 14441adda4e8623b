"""Implicit Euler scheme for ``d_t (u^(q-1)) + (-Delta)^theta u = 0``.

Each step solves ``u^(q-1) + dt D u = u_prev^(q-1)`` by damped Newton (odd
powers are sign preserving). Runs keep the state in scaled form so that the
fast-diffusion decay can be followed far below the smallest double.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._stepping import (
    ZERO_LOG,
    EnergyCheck,
    NewtonFailure,
    ScaledState,
    ScaledStepper,
    energy_check,
    safe_exp,
)
from .kernel import Field, Grid, Kernel

__all__ = [
    "StepDiagnostics",
    "Trajectory",
    "NewtonFailure",
    "step",
    "run",
    "sample_initial",
    "INITIAL_DATA",
    "ENERGY_TOL",
    "NEWTON_TOL",
]

NEWTON_TOL = 1e-8
NEWTON_MAXITER = 100
ENERGY_TOL = 1e-8


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-state diagnostics.

    ``lq_norm_q`` and ``xnorm_sq`` underflow to zero near extinction; the
    ``log_*`` fields stay exact. ``energy`` is ``None`` for the initial state.
    """

    lq_norm_q: float
    xnorm_sq: float
    rayleigh: float
    newton_iterations: int
    newton_residual: float
    log_lq_norm: float
    log_xnorm_sq: float
    energy: EnergyCheck | None = None
    negative_nodes: int = 0

    @property
    def lq_norm(self) -> float:
        return safe_exp(self.log_lq_norm)

    @property
    def energy_ok(self) -> bool:
        return self.energy is None or self.energy.ok(ENERGY_TOL)


@dataclass
class Trajectory:
    """States ``u^n`` at ``t_n = n dt`` with per-state diagnostics.

    States are stored as a log scale and a shape normalized to max-norm one,
    so ``values`` may underflow while ``log_scales`` and ``shapes`` do not.
    """

    grid: Grid
    dt: float
    q: float
    log_scales: np.ndarray
    shapes: np.ndarray
    diagnostics: list
    scheme: str = "implicit"
    flags: list = field(default_factory=list)
    t_offset: float = 0.0

    @property
    def n_states(self) -> int:
        return len(self.log_scales)

    @property
    def times(self) -> np.ndarray:
        return self.t_offset + self.dt * np.arange(self.n_states)

    def state(self, n: int) -> ScaledState:
        return ScaledState(float(self.log_scales[n]), self.shapes[n])

    def field(self, n: int) -> Field:
        return Field(self.grid, self.state(n).values())

    @property
    def values(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            s = np.where(np.isfinite(self.log_scales), np.exp(self.log_scales), 0.0)
        return s[:, None] * self.shapes

    @property
    def states(self) -> list:
        return [(t, self.field(n)) for n, t in enumerate(self.times)]

    @property
    def log_lq_norms(self) -> np.ndarray:
        return np.array([d.log_lq_norm for d in self.diagnostics])

    def lq_norms(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.log_lq_norms)

    @property
    def rayleighs(self) -> np.ndarray:
        return np.array([d.rayleigh for d in self.diagnostics])

    @property
    def newton_iterations(self) -> np.ndarray:
        return np.array([d.newton_iterations for d in self.diagnostics])


def _diagnose(state: ScaledState, D, h, q, info=None, energy=None) -> StepDiagnostics:
    iters = info.iterations if info else 0
    res = info.residual if info else 0.0
    if state.is_zero:
        return StepDiagnostics(0.0, 0.0, math.nan, iters, res, ZERO_LOG, ZERO_LOG, energy)
    log_lq = state.log_lq(q, h)
    log_x = state.log_xsq(D, h)
    # scale-free, so evaluate on the normalized shape
    shape_x = h * float(state.shape @ (D @ state.shape))
    shape_lq = (h * float(np.sum(np.abs(state.shape) ** q))) ** (1.0 / q)
    ray = shape_x / shape_lq**2
    lq_q = safe_exp(q * log_lq)
    xsq = safe_exp(log_x)
    neg = int(np.count_nonzero(state.shape < 0))
    return StepDiagnostics(lq_q, xsq, ray, iters, res, log_lq, log_x, energy, neg)


def _stepper(kernel: Kernel, grid: Grid, dt: float, q: float, kappa=1.0, solver=None):
    _validate_q(q)
    return ScaledStepper(
        kernel.matrix(grid), kernel.total_sum, dt, q, kappa=kappa,
        tol=NEWTON_TOL, maxiter=NEWTON_MAXITER, solver=solver,
    )


def _validate_q(q):
    if not (q > 1 and math.isfinite(q)):
        raise ValueError(f"q must exceed 1, got {q}")


def step(kernel: Kernel, u_prev: Field, dt: float, q: float) -> tuple[Field, StepDiagnostics]:
    """One implicit Euler step from ``u_prev``.

    Raises :class:`NewtonFailure` if the solve does not converge.
    """
    grid = u_prev.grid
    stepper = _stepper(kernel, grid, dt, q)
    prev = ScaledState.from_values(u_prev.values)
    cur, info = stepper.advance(prev)
    energy = energy_check(prev, cur, stepper.D, grid.h, dt, q)
    return Field(grid, cur.values()), _diagnose(cur, stepper.D, grid.h, q, info, energy)


def run(
    kernel: Kernel,
    u0: Field,
    dt: float,
    q: float,
    n_steps: int,
    *,
    solver=None,
    check_energy: bool = True,
) -> Trajectory:
    """``n_steps`` implicit Euler steps from ``u0``.

    Energy-inequality violations beyond ``ENERGY_TOL`` are recorded in the
    ``flags`` list and the run continues.
    """
    grid = u0.grid
    stepper = _stepper(kernel, grid, dt, q, solver=solver)
    D, h = stepper.D, grid.h
    state = ScaledState.from_values(u0.values)
    log_scales = np.empty(n_steps + 1)
    shapes = np.empty((n_steps + 1, grid.size))
    log_scales[0], shapes[0] = state.log_scale, state.shape
    diags = [_diagnose(state, D, h, q)]
    flags = []
    for n in range(1, n_steps + 1):
        new, info = stepper.advance(state)
        energy = energy_check(state, new, D, h, dt, q) if check_energy else None
        d = _diagnose(new, D, h, q, info, energy)
        if energy is not None and not energy.ok(ENERGY_TOL):
            flags.append((n, "energy"))
        log_scales[n], shapes[n] = new.log_scale, new.shape
        diags.append(d)
        state = new
    return Trajectory(grid, dt, q, log_scales, shapes, diags, "implicit", flags)


def _bump(x):
    return np.where(np.abs(x) <= 0.5, (0.5 - x) * (0.5 + x), 0.0)


def _shifted_bump(x):
    # -x (1/2 + x) on [-1, 0]; changes sign at x = -1/2
    return np.where((x >= -1.0) & (x <= 0.0), -x * (0.5 + x), 0.0)


def _shifted_bump_wide(x):
    # -x (1 + x) on [-1, 0]; the nonnegative bump of width one centred at -1/2
    return np.where((x >= -1.0) & (x <= 0.0), -x * (1.0 + x), 0.0)


INITIAL_DATA = {
    "bump": _bump,
    "shifted_bump": _shifted_bump,
    "shifted_bump_wide": _shifted_bump_wide,
}


def sample_initial(grid: Grid, spec) -> Field:
    """Nodal samples of a named profile, or a custom table of nodal values.

    Named profiles are ``bump``, ``(1/2 - x)(1/2 + x)`` on ``[-1/2, 1/2]``;
    ``shifted_bump``, ``-x(1/2 + x)`` on ``[-1, 0]``; and
    ``shifted_bump_wide``, ``-x(1 + x)`` on ``[-1, 0]``.
    """
    if isinstance(spec, str):
        try:
            fn = INITIAL_DATA[spec]
        except KeyError:
            raise ValueError(f"unknown initial datum {spec!r}; known: {sorted(INITIAL_DATA)}") from None
        return Field(grid, fn(grid.nodes))
    if callable(spec):
        return Field(grid, np.asarray(spec(grid.nodes), dtype=float))
    table = np.asarray(spec, dtype=float)
    if table.shape != (grid.size,):
        raise ValueError(f"custom table has {table.size} entries, grid has {grid.size} nodes")
    return Field(grid, table)


def backend_name() -> str:
    return _backend.BACKEND
