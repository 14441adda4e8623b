"""Positive solutions of ``D f = lambda f^(q-1)`` and the optimal Poincare-Sobolev constant."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .kernel import Field, Grid, Kernel
from .spaces import lq_norm, x_norm

__all__ = [
    "StationaryProfile",
    "StationaryFailure",
    "critical_exponent",
    "default_grid",
    "solve_lane_emden",
    "optimal_constant",
]


class StationaryFailure(RuntimeError):
    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


@dataclass(frozen=True)
class StationaryProfile:
    field: Field
    coefficient: float
    residual_inf: float
    iterations: int

    @property
    def values(self) -> np.ndarray:
        return self.field.values


def critical_exponent(theta: float) -> float:
    """``2/(1 - 2 theta)_+`` in one dimension (infinite for ``theta >= 1/2``)."""
    d = 1.0 - 2.0 * theta
    return 2.0 / d if d > 0 else math.inf


def default_grid(kernel: Kernel) -> Grid:
    """The largest grid a kernel built by ``kernel_for_grid`` was meant for."""
    m = kernel.J // 2
    return Grid(L=(m + 1) * kernel.h, M_x=m)


def _inverse_iteration(D, h, q, g, iters=400, tol=1e-12):
    """Normalized nonlinear inverse iteration ``g <- D^-1 g^(q-1)`` with ``||g||_q = 1``."""
    lu = sla.lu_factor(D, check_finite=False)
    for _ in range(iters):
        w = sla.lu_solve(lu, g ** (q - 1.0), check_finite=False)
        w /= (h * np.sum(np.abs(w) ** q)) ** (1.0 / q)
        done = np.max(np.abs(w - g)) <= tol * np.max(np.abs(w))
        g = w
        if done:
            break
    return g


def _solve_unit(kernel: Kernel, grid: Grid, q: float, guess=None, tol=1e-13, maxiter=100):
    """Positive solution of ``D f = f^(q-1)``."""
    D = kernel.matrix(grid)
    h = grid.h
    if guess is None:
        x = grid.nodes
        g = np.maximum((0.5 - x) * (0.5 + x), 0.0)
        if not np.any(g > 0):
            g = np.ones(grid.size)
        g = np.where(g > 0, g, np.min(g[g > 0]) * 1e-3)
    else:
        g = np.array(guess, dtype=float)
        if np.any(g <= 0):
            raise ValueError("initial guess must be positive")
    g = g / (h * np.sum(g**q)) ** (1.0 / q)
    g = _inverse_iteration(D, h, q, g)
    # g solves D g = mu g^(q-1) with mu = ||g||_X^2, and c g solves it with mu c^(2-q)
    mu = h * float(g @ D @ g)
    f = g * mu ** (1.0 / (q - 2.0))
    for it in range(1, maxiter + 1):
        F = D @ f - f ** (q - 1.0)
        J = D - np.diag((q - 1.0) * f ** (q - 2.0))
        try:
            delta = -sla.solve(J, F, check_finite=False)
        except (sla.LinAlgError, ValueError) as exc:
            raise StationaryFailure(f"singular Jacobian: {exc}", f) from exc
        neg = delta < 0
        t = 1.0
        if np.any(neg):
            t_edge = float(np.min(-f[neg] / delta[neg]))
            if t_edge <= 1.0:
                t = 0.5 * t_edge
        f = f + t * delta
        if np.any(f <= 0) or not np.all(np.isfinite(f)):
            raise StationaryFailure("lost positivity", f)
        if t == 1.0 and np.max(np.abs(delta)) <= tol * np.max(f):
            break
    else:
        raise StationaryFailure("Newton did not converge", f)
    res = float(np.max(np.abs(D @ f - f ** (q - 1.0))))
    scale = float(np.max(np.abs(D @ f)))
    if res > 1e-10 * scale:
        raise StationaryFailure(f"residual {res:.3e} above tolerance", f)
    return f, res, it


def solve_lane_emden(kernel: Kernel, q: float, lam: float = 1.0, *, grid=None, guess=None) -> StationaryProfile:
    """Positive solution of ``D f = lam f^(q-1)``.

    The ``lam = 1`` problem is solved and rescaled: if ``D f = f^(q-1)`` then
    ``c f`` solves the equation with coefficient ``c^(2-q)``.
    """
    if q == 2:
        raise ValueError("q = 2 is the linear eigenvalue problem; use optimal_constant")
    if not q > 1:
        raise ValueError(f"q must exceed 1, got {q}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    grid = grid or default_grid(kernel)
    f1, _, iters = _solve_unit(kernel, grid, q, guess)
    c = lam ** (1.0 / (2.0 - q))
    f = c * f1
    D = kernel.matrix(grid)
    res = float(np.max(np.abs(D @ f - lam * f ** (q - 1.0))))
    return StationaryProfile(Field(grid, f), float(lam), res, iters)


def optimal_constant(kernel: Kernel, q: float, *, grid=None, guess=None) -> float:
    """Best constant ``C`` in ``||f||_q <= C ||f||_X`` on the grid.

    For ``q = 2`` this is ``lambda_min(D)^(-1/2)``; otherwise it is the ratio
    ``||f||_q / ||f||_X`` at the positive Lane-Emden solution.
    """
    grid = grid or default_grid(kernel)
    if q == 2:
        lmin = sla.eigvalsh(kernel.matrix(grid), subset_by_index=[0, 0])[0]
        return float(lmin ** -0.5)
    theta = kernel.theta
    if not (1 < q <= critical_exponent(theta)):
        raise ValueError(f"q must lie in (1, {critical_exponent(theta)}], got {q}")
    prof = solve_lane_emden(kernel, q, 1.0, grid=grid, guess=guess)
    return lq_norm(prof.field, q) / x_norm(kernel, prof.field)
