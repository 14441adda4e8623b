"""Discrete norms: l^q_h, the energy (X) norm and the Rayleigh quotient."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import Field, Kernel, apply

__all__ = [
    "NormReport",
    "PoincareSobolevCheck",
    "lq_norm",
    "x_norm",
    "x_norm_sq",
    "inner",
    "x_inner",
    "gagliardo_sq",
    "rayleigh",
    "norm_report",
    "random_fields",
    "verify_poincare_sobolev",
]


@dataclass(frozen=True)
class NormReport:
    lq: float
    xnorm: float
    rayleigh: float


@dataclass(frozen=True)
class PoincareSobolevCheck:
    passed: bool
    worst_ratio: float
    worst_index: int
    samples: int


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=float)


def lq_norm(f: Field, q: float) -> float:
    """``(sum_i h |f_i|^q)^(1/q)``.

    The maximum is factored out first so that tiny or huge fields do not
    underflow or overflow in the power.
    """
    if q < 1:
        raise ValueError(f"q must be at least 1, got {q}")
    v = np.abs(f.values)
    m = v.max(initial=0.0)
    if m == 0.0:
        return 0.0
    return m * (f.grid.h * np.sum((v / m) ** q)) ** (1.0 / q)


def inner(f: Field, g: Field) -> float:
    """The l^2_h inner product ``sum_i h f_i g_i``."""
    return f.grid.h * float(np.dot(f.values, g.values))


def x_inner(kernel: Kernel, f: Field, g: Field) -> float:
    """Energy inner product ``(D f, g)`` in l^2_h."""
    return inner(apply(kernel, f), g)


def x_norm_sq(kernel: Kernel, f: Field) -> float:
    val = x_inner(kernel, f, f)
    if val < 0:
        scale = kernel.total_sum * inner(f, f)
        if val < -1e-12 * scale:
            raise FloatingPointError(f"negative energy {val}: kernel is corrupted")
        val = 0.0
    return val


def x_norm(kernel: Kernel, f: Field) -> float:
    """Energy norm through the Green identity, ``sqrt((D f, f))``.

    The maximum is factored out so the square does not underflow or overflow.
    """
    m = float(np.max(np.abs(f.values), initial=0.0))
    if m == 0.0:
        return 0.0
    return m * float(np.sqrt(x_norm_sq(kernel, f.scaled(1.0 / m))))


def gagliardo_sq(kernel: Kernel, f: Field) -> float:
    """Energy by the double-difference form, with the exterior handled by exact tails.

    ``1/2 sum_i sum_j h w_j |f_i - f_{i-j}|^2`` over all of Z, where f vanishes
    outside the interval. This is O(N^2) and is meant for cross-checks.
    """
    v = f.values
    n = v.size
    m = f.grid.M_x
    w = kernel.weights
    i = np.arange(n)
    W = w[np.abs(i[:, None] - i[None, :])]
    diff2 = (v[:, None] - v[None, :]) ** 2
    inside = 0.5 * np.sum(W * diff2)
    # pairs with one node inside and one outside counted twice (i inside, i-j outside and vice versa)
    t1 = kernel.one_sided_tails()
    idx = np.arange(-m, m + 1)
    outside = np.sum((t1[m - idx] + t1[m + idx]) * v**2)
    return f.grid.h * (inside + outside)


def rayleigh(kernel: Kernel, f: Field, q: float) -> float:
    """``||f||_X^2 / ||f||_q^2``."""
    lq = lq_norm(f, q)
    if lq == 0:
        raise ValueError("Rayleigh quotient of the zero field is undefined")
    # homogeneous of degree 0 only for q = 2, so scale out the maximum explicitly
    m = np.abs(f.values).max()
    g = f.scaled(1.0 / m)
    return x_norm_sq(kernel, g) / lq_norm(g, q) ** 2


def norm_report(kernel: Kernel, f: Field, q: float) -> NormReport:
    lq = lq_norm(f, q)
    xn = x_norm(kernel, f)
    r = rayleigh(kernel, f, q) if lq > 0 else float("inf")
    return NormReport(lq=lq, xnorm=xn, rayleigh=r)


def random_fields(grid, samples: int, seed: int = 0) -> np.ndarray:
    """Seeded i.i.d. uniform[-1, 1] nodal values, one row per sample."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(samples, grid.size))


def verify_poincare_sobolev(
    kernel: Kernel,
    q: float,
    C: float,
    samples: int = 1000,
    *,
    grid=None,
    seed: int = 0,
    slack: float = 1e-10,
    fields=None,
) -> PoincareSobolevCheck:
    """Check ``||f||_q <= C ||f||_X`` over random fields.

    The ratio reported is ``||f||_q / (C ||f||_X)``; the zero field has ratio 0.
    Extra fields to test (for example a known optimizer) may be passed in
    ``fields`` as an array of rows.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    if grid is None:
        from .kernel import Grid

        grid = Grid(L=(kernel.J // 2 + 1) * kernel.h, M_x=kernel.J // 2)
    rows = random_fields(grid, samples, seed)
    if fields is not None:
        rows = np.vstack([rows, np.atleast_2d(np.asarray(fields, dtype=float))])
    D = kernel.matrix(grid)
    h = grid.h
    X2 = h * np.einsum("ij,ij->i", rows @ D, rows)
    absr = np.abs(rows)
    Q = (h * np.sum(absr**q, axis=1)) ** (1.0 / q)
    ratio = np.zeros(len(rows))
    nz = Q > 0
    ratio[nz] = Q[nz] / (C * np.sqrt(np.maximum(X2[nz], 0.0)))
    k = int(np.argmax(ratio)) if len(ratio) else 0
    worst = float(ratio[k]) if len(ratio) else 0.0
    return PoincareSobolevCheck(
        passed=bool(worst <= 1.0 + slack), worst_ratio=worst, worst_index=k, samples=len(rows)
    )
