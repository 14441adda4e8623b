"""Self-convergence studies against a fine reference solution.

Errors are ``max_n ||u^n - u_ref(t_n)||_q`` on the coarse grid. In time the
reference is interpolated linearly to the coarse nodes (exact when the levels
are nested); in space it is restricted to the coarse nodes, which requires
nested grids.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..implicit import run, sample_initial
from ..kernel import Grid, kernel_for_grid

__all__ = [
    "ConvergenceRow",
    "NonNestedError",
    "observed_orders",
    "time_convergence",
    "space_convergence",
    "lq_error",
    "shared_strides",
]


class NonNestedError(ValueError):
    pass


@dataclass(frozen=True)
class ConvergenceRow:
    level: float
    error: float
    observed_order: float | None


def lq_error(a: np.ndarray, b: np.ndarray, h: float, q: float) -> float:
    """``max_n (h sum_i |a_ni - b_ni|^q)^(1/q)``."""
    d = np.abs(a - b)
    scale = np.max(d, initial=0.0)
    if scale == 0:
        return 0.0
    per_n = (h * np.sum((d / scale) ** q, axis=1)) ** (1.0 / q)
    return float(scale * np.max(per_n))


def observed_orders(levels, errors) -> list:
    """Pairwise ``log(e_k/e_(k+1)) / log(l_k/l_(k+1))``; ``None`` for the first level."""
    out = [None]
    for k in range(1, len(levels)):
        e0, e1 = errors[k - 1], errors[k]
        if e0 > 0 and e1 > 0:
            out.append(math.log(e0 / e1) / math.log(levels[k - 1] / levels[k]))
        else:
            out.append(float("nan"))
    return out


def _ratio(a, b, what):
    r = a / b
    n = round(r)
    if n < 1 or abs(r - n) > 1e-9 * r:
        raise NonNestedError(f"{what}: {a} is not an integer multiple of {b}")
    return int(n)


def _rows(levels, errors):
    return [ConvergenceRow(l, e, o) for l, e, o in zip(levels, errors, observed_orders(levels, errors))]


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _rational(x: float, what: str) -> Fraction:
    r = Fraction(x).limit_denominator(10**9)
    if abs(float(r) - x) > 1e-12 * abs(x):
        raise NonNestedError(f"{what}: {x} is not a (short) rational number")
    return r


def _lcm(a: Fraction, b: Fraction) -> Fraction:
    # lcm(p/q, r/s) = lcm(p, r) / gcd(q, s)
    return Fraction(math.lcm(a.numerator, b.numerator), math.gcd(a.denominator, b.denominator))


def shared_strides(dt: float, dt_ref: float, T: float) -> tuple[int, int, int]:
    """Strides ``(k, k_ref)`` of the common time grid in each run and the number of shared nodes.

    The shared nodes are the multiples of ``lcm(dt, dt_ref)`` in ``[0, T]``;
    ``T`` itself must be one of them.
    """
    a, b, t = _rational(dt, "time level"), _rational(dt_ref, "reference step"), _rational(T, "final time")
    common = _lcm(a, b)
    if t % common != 0:
        raise NonNestedError(f"final time {T} is not on the common grid of {dt} and {dt_ref} (spacing {float(common)})")
    return int(common / a), int(common / b), int(t / common)


def _interpolate(ref: np.ndarray, dt_ref: float, times: np.ndarray) -> np.ndarray:
    """Reference states linearly interpolated in time at ``times``."""
    pos = times / dt_ref
    j = np.minimum(np.floor(pos + 1e-9).astype(int), ref.shape[0] - 2)
    w = np.clip(pos - j, 0.0, 1.0)
    w[np.abs(w) < 1e-9] = 0.0
    return (1.0 - w)[:, None] * ref[j] + w[:, None] * ref[j + 1]


def time_convergence(
    q: float,
    theta: float,
    L: float,
    h: float,
    T: float,
    initial,
    dts,
    dt_ref: float,
    *,
    compare: str = "interpolate",
    threads: int = 1,
) -> list[ConvergenceRow]:
    """Errors of runs with step ``dt`` against the ``dt_ref`` run on the same grid.

    ``compare = "interpolate"`` measures the error at every node of the
    coarse run against the reference interpolated linearly in time;
    ``compare = "shared"`` uses only the nodes both runs share (the multiples
    of ``lcm(dt, dt_ref)``). The two agree when ``dt`` is a multiple of
    ``dt_ref``.
    """
    if compare not in ("interpolate", "shared"):
        raise ValueError(f"compare must be 'interpolate' or 'shared', got {compare!r}")
    dts = sorted(dts, reverse=True)
    n_ref = _ratio(T, dt_ref, "final time")
    if compare == "shared":
        plans = [shared_strides(dt, dt_ref, T) for dt in dts]
    else:
        plans = [(1, None, _ratio(T, dt, "final time")) for dt in dts]
    grid = Grid.from_step(L, h)
    kernel = kernel_for_grid(theta, grid)
    u0 = sample_initial(grid, initial)
    ref = run(kernel, u0, dt_ref, q, n_ref, check_energy=False).values

    def one(arg):
        dt, (k, k_ref, m) = arg
        if dt == dt_ref:
            return 0.0
        vals = run(kernel, u0, dt, q, k * m, check_energy=False).values
        if k_ref is None:
            return lq_error(vals, _interpolate(ref, dt_ref, dt * np.arange(m + 1)), grid.h, q)
        return lq_error(vals[::k], ref[::k_ref], grid.h, q)

    errors = _map(one, list(zip(dts, plans)), threads)
    return _rows(dts, errors)


def space_convergence(
    q: float, theta: float, L: float, dt: float, T: float, initial, hs, h_ref: float, *, threads: int = 1
) -> list[ConvergenceRow]:
    """Errors of runs with mesh ``h`` against the ``h_ref`` run restricted to the coarse nodes."""
    hs = sorted(hs, reverse=True)
    n_steps = _ratio(T, dt, "final time")
    fine = Grid.from_step(L, h_ref)
    ratios = [_ratio(h, h_ref, "space levels") for h in hs]
    ref = run(kernel_for_grid(theta, fine), sample_initial(fine, initial), dt, q, n_steps, check_energy=False).values

    def one(arg):
        h, r = arg
        if r == 1:
            return 0.0
        grid = Grid.from_step(L, h)
        vals = run(kernel_for_grid(theta, grid), sample_initial(grid, initial), dt, q, n_steps, check_energy=False).values
        # coarse node i sits at fine node r*i (both grids are centred at 0)
        idx = fine.M_x + r * np.arange(-grid.M_x, grid.M_x + 1)
        return lq_error(vals, ref[:, idx], h, q)

    errors = _map(one, list(zip(hs, ratios)), threads)
    return _rows(hs, errors)
