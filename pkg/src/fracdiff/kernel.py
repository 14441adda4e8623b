"""Discrete fractional Laplacian on a uniform 1D grid.

The operator is the quadrature-based convolution

    [D f]_i = sum_{j != 0} w_j (f_i - f_{i-j}),

with ``f`` extended by zero outside the interval ``(-L, L)``. The weights come
from integrating the singular kernel against a piecewise quadratic interpolant
of ``f``, which is what makes the scheme consistent of order ``3 - 2*theta``.

Weights are evaluated from an auxiliary function ``G`` with
``G''' = C_theta |t|^{-1-2 theta}``. Every weight is invariant under adding an
affine function to ``G``, so we use the representative

    G(t) = -C t (phi(1 - 2 theta, log t) - 1) / (2 theta (2 - 2 theta)),
    phi(a, x) = expm1(a x) / a,   phi(0, x) = x,

which is smooth in ``theta`` (no separate branch at ``theta = 1/2``) and avoids
the catastrophic ``1/(2 theta - 1)`` factor. For large ``j`` the closed form
still loses digits to cancellation, so a convergent Taylor series in ``1/j`` is
used instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "Kernel",
    "normalizing_constant",
    "weight_sum",
    "compute_weights",
    "kernel_for_grid",
    "analytic_tail",
    "apply",
    "assemble",
]

# The closed form is used below this index. It loses about a digit per doubling
# of j to cancellation, while the series converges like (2/j)^(2k) from j = 2.
_SERIES_FROM = 2
# |2 theta - 1| below this is treated as theta = 1/2 exactly.
_HALF_WINDOW = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_i = i h`` for ``|i| <= M_x`` with ``L = (M_x + 1) h``."""

    L: float
    M_x: int

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"L must be positive and finite, got {self.L}")
        if int(self.M_x) != self.M_x or self.M_x < 0:
            raise ValueError(f"M_x must be a nonnegative integer, got {self.M_x}")
        object.__setattr__(self, "M_x", int(self.M_x))

    @classmethod
    def from_step(cls, L: float, h: float) -> "Grid":
        """Build the grid with mesh width ``h``; ``L/h`` must be an integer >= 1."""
        if not h > 0:
            raise ValueError(f"h must be positive, got {h}")
        ratio = L / h
        m = round(ratio)
        if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"L/h = {ratio!r} is not a positive integer")
        return cls(L=L, M_x=m - 1)

    @property
    def h(self) -> float:
        return self.L / (self.M_x + 1)

    @property
    def size(self) -> int:
        return 2 * self.M_x + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(-self.M_x, self.M_x + 1) * self.h

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.size))


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values on a :class:`Grid`, implicitly zero outside the interval."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(
                f"field has shape {v.shape}, grid expects ({self.grid.size},)"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __len__(self):
        return self.grid.size

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def scaled(self, c: float) -> "Field":
        return Field(self.grid, c * self.values)


def normalizing_constant(theta: float) -> float:
    """The constant ``C_{1,theta}`` of the 1D fractional Laplacian."""
    _check_theta(theta)
    return (
        2.0 * theta * 2.0 ** (2.0 * theta - 1.0)
        * math.gamma(0.5 + theta)
        / (math.sqrt(math.pi) * math.gamma(1.0 - theta))
    )


def weight_sum(theta: float, h: float) -> float:
    """Closed form of ``sum_{j != 0} w_j`` (both sides)."""
    _check_theta(theta)
    return (
        2.0 ** (2.0 * theta) * math.gamma(0.5 + theta)
        / (math.sqrt(math.pi) * math.gamma(2.0 - theta))
        * h ** (-2.0 * theta)
    )


def _check_theta(theta):
    if not (0.0 < theta < 1.0):
        raise ValueError(f"theta must lie in (0, 1), got {theta}")


def _phi(a: float, x):
    if abs(a) < _HALF_WINDOW:
        return x
    return np.expm1(a * x) / a


class _Aux:
    """The normalized auxiliary function and its derivatives for one theta."""

    def __init__(self, theta: float):
        self.theta = theta
        self.C = normalizing_constant(theta)
        self.a = 1.0 - 2.0 * theta

    def G(self, t):
        t = np.asarray(t, dtype=float)
        th = self.theta
        return -self.C * t * (_phi(self.a, np.log(t)) - 1.0) / (2.0 * th * (2.0 - 2.0 * th))

    def dG(self, t):
        t = np.asarray(t, dtype=float)
        return -self.C * _phi(self.a, np.log(t)) / (2.0 * self.theta)

    def d2G_at_one(self):
        return -self.C / (2.0 * self.theta)

    def taylor_coeffs(self, n_max: int) -> np.ndarray:
        """``d[n] = G^(n)(t) t^(n - 2 + 2 theta) / n!`` for ``n >= 2`` (t-independent)."""
        d = np.zeros(n_max + 1)
        d[2] = -self.C / (4.0 * self.theta)
        for n in range(2, n_max):
            d[n + 1] = d[n] * (2.0 - 2.0 * self.theta - n) / (n + 1)
        return d


def _closed_form(aux: _Aux, j: np.ndarray) -> np.ndarray:
    """Unscaled weights (``h = 1``) from the three-case formula."""
    j = np.asarray(j, dtype=float)
    out = np.empty_like(j)
    one = j == 1
    even = (j % 2 == 0) & ~one
    odd = (j % 2 == 1) & ~one
    th = aux.theta
    if np.any(one):
        out[one] = (
            aux.C / (2.0 - 2.0 * th)
            - aux.d2G_at_one()
            - (aux.dG(3.0) + 3.0 * aux.dG(1.0)) / 2.0
            + aux.G(3.0)
            - aux.G(1.0)
        )
    if np.any(even):
        je = j[even]
        out[even] = 2.0 * (aux.dG(je + 1) + aux.dG(je - 1) - aux.G(je + 1) + aux.G(je - 1))
    if np.any(odd):
        jo = j[odd]
        out[odd] = (
            -(aux.dG(jo + 2) + 6.0 * aux.dG(jo) + aux.dG(jo - 2)) / 2.0
            + aux.G(jo + 2)
            - aux.G(jo - 2)
        )
    return out


def _series(aux: _Aux, j: np.ndarray, terms: int = 80) -> np.ndarray:
    """Unscaled weights from the Taylor expansion of the closed form about ``j``."""
    j = np.asarray(j, dtype=float)
    d = aux.taylor_coeffs(2 * terms + 2)
    even = j % 2 == 0
    out = np.zeros_like(j)
    p = 2.0 - 2.0 * aux.theta
    for k in range(1, terms + 1):
        n = 2 * k + 1
        base = d[n] * j ** (p - n)
        term = np.where(even, base * 8.0 * k, base * 4.0**k * (3.0 - 2.0 * k))
        out += term
        if np.all(np.abs(term) <= 1e-18 * np.abs(out)):
            break
    return out


def _unscaled_weights(theta: float, J: int) -> np.ndarray:
    aux = _Aux(theta)
    j = np.arange(1, J + 1, dtype=float)
    w = np.empty(J)
    near = j < _SERIES_FROM
    w[near] = _closed_form(aux, j[near])
    if np.any(~near):
        w[~near] = _series(aux, j[~near])
    return w


class Kernel:
    """Weights ``w_0 .. w_J`` (``w_0 = 0``) with the exact total and tails.

    Instances are immutable; matrices assembled for a given grid are cached.
    """

    def __init__(self, theta: float, h: float, J: int):
        _check_theta(theta)
        if not h > 0:
            raise ValueError(f"h must be positive, got {h}")
        if J < 3:
            raise ValueError(f"J must be at least 3, got {J}")
        w = np.empty(J + 1)
        w[0] = 0.0
        w[1:] = _unscaled_weights(theta, J) * h ** (-2.0 * theta)
        if not np.all(np.isfinite(w)):
            raise FloatingPointError("non-finite weight encountered")
        if not np.all(w[1:] > 0):
            raise FloatingPointError("nonpositive weight encountered")
        w.setflags(write=False)
        self._theta = float(theta)
        self._h = float(h)
        self._w = w
        self._total = weight_sum(theta, h)
        # one-sided tails: tail1[k] = sum_{j > k} w_j, from the exact total
        tail1 = self._total / 2.0 - np.concatenate(([0.0], np.cumsum(w[1:])))
        tail1.setflags(write=False)
        self._tail1 = tail1
        self._matrices: dict[int, np.ndarray] = {}

    theta = property(lambda self: self._theta)
    h = property(lambda self: self._h)
    weights = property(lambda self: self._w)
    total_sum = property(lambda self: self._total)

    @property
    def J(self) -> int:
        return self._w.size - 1

    def weight(self, j) -> np.ndarray:
        """Symmetric weights ``w_j`` for integer ``|j| <= J``."""
        return self._w[np.abs(np.asarray(j))]

    def tail(self, k: int) -> float:
        """Two-sided tail ``sum_{|j| > k} w_j``."""
        return 2.0 * self._tail1[k]

    def one_sided_tails(self) -> np.ndarray:
        return self._tail1

    def covers(self, grid: Grid) -> bool:
        return abs(grid.h - self._h) <= 1e-12 * self._h and self.J >= 2 * grid.M_x

    def matrix(self, grid: Grid) -> np.ndarray:
        """Cached read-only dense matrix; see :func:`assemble`."""
        D = self._matrices.get(grid.M_x)
        if D is None:
            D = assemble(self, grid)
            D.setflags(write=False)
            self._matrices[grid.M_x] = D
        return D

    def __repr__(self):
        return f"Kernel(theta={self._theta!r}, h={self._h!r}, J={self.J})"


def compute_weights(theta: float, h: float, J: int) -> Kernel:
    """Weights ``w_1 .. w_J`` for exponent ``theta`` and mesh width ``h``."""
    return Kernel(theta, h, J)


def kernel_for_grid(theta: float, grid: Grid) -> Kernel:
    """Smallest kernel that covers ``grid``."""
    return Kernel(theta, grid.h, max(3, 2 * grid.M_x + 1))


def analytic_tail(theta: float, h: float, J: int) -> float:
    """One-sided tail ``sum_{j > J} w_j`` by telescoping, independent of the weights table.

    For odd ``J`` the weights beyond ``J`` telescope to
    ``(3 G'(J) + G'(J+2))/2 - G(J+2) + G(J)``; this is expanded about ``J + 1``
    to avoid cancellation. Even ``J`` adds the single weight ``w_{J+1}``.
    """
    _check_theta(theta)
    if J < 1:
        raise ValueError("J must be at least 1")
    aux = _Aux(theta)
    extra = 0.0
    if J % 2 == 0:
        extra = float(_unscaled_weights(theta, J + 1)[-1])
        J += 1
    a = float(J + 1)
    p = 2.0 - 2.0 * theta
    d = aux.taylor_coeffs(402)
    total = 0.0
    for k in range(1, 200):
        t_even = -d[2 * k] * a ** (p - 2 * k) * 2.0 * k
        t_odd = d[2 * k + 1] * a ** (p - 2 * k - 1) * 4.0 * k
        total += t_even + t_odd
        if abs(t_even) + abs(t_odd) <= 1e-18 * abs(total):
            break
    return (total + extra) * h ** (-2.0 * theta)


def _check_compatible(kernel: Kernel, grid: Grid):
    if abs(grid.h - kernel.h) > 1e-12 * kernel.h:
        raise ValueError(f"grid step {grid.h} does not match kernel step {kernel.h}")
    if kernel.J < 2 * grid.M_x:
        raise ValueError(f"kernel covers |j| <= {kernel.J}, need {2 * grid.M_x}")


def _exterior_tails(kernel: Kernel, grid: Grid) -> np.ndarray:
    """``sum_{|j - i| > M_x} w_j`` at every node ``i``, i.e. sum_{k outside} w_{i-k}."""
    m = grid.M_x
    i = np.arange(-m, m + 1)
    t1 = kernel.one_sided_tails()
    return t1[m - i] + t1[m + i]


def apply(kernel: Kernel, f) -> Field:
    """Apply the discrete fractional Laplacian to a :class:`Field`."""
    if not isinstance(f, Field):
        raise TypeError("apply expects a Field")
    grid = f.grid
    _check_compatible(kernel, grid)
    v = f.values
    n = grid.size
    w = kernel.weights
    # sum_{k != i} w_{i-k} f_k via the full convolution with the symmetric stencil
    stencil = w[np.abs(np.arange(-(n - 1), n))]
    coupled = np.convolve(v, stencil)[n - 1 : 2 * n - 1]
    # inner row sum plus exterior tail is the exact total
    out = kernel.total_sum * v - coupled
    return Field(grid, out)


def assemble(kernel: Kernel, grid: Grid) -> np.ndarray:
    """Dense symmetric matrix of the operator on the interior nodes.

    Off-diagonal entries are ``-w_{j-i}`` and the diagonal is ``total_sum``.
    """
    _check_compatible(kernel, grid)
    n = grid.size
    idx = np.arange(n)
    D = -kernel.weights[np.abs(idx[:, None] - idx[None, :])]
    D[idx, idx] = kernel.total_sum
    return D
