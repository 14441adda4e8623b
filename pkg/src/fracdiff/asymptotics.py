"""Asymptotic profile near extinction and the linearized rescaled dynamics.

Writing ``v = f + w`` around a positive solution ``f`` of
``D f = (lambda_q/t0) f^(q-1)`` gives, to first order,

    (q - 1) w_s = -(A D - (q - 1)(lambda_q/t0) I) w,   A = diag(f^(2-q)),

so a mode with eigenvalue ``nu`` of ``A D - (q-1)(lambda_q/t0) I`` behaves like
``exp(-nu s/(q-1))``. The profile itself is an eigenvector with eigenvalue
``-(q-1)/t0``: it is the growing mode excited by an inexact ``t0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .kernel import Field, Kernel

__all__ = [
    "ProfileNotFormed",
    "SpectralReport",
    "RateFit",
    "extract_profile",
    "linearized_spectrum",
    "lane_emden_residual",
    "error_series",
    "two_segment_fit",
    "rate_fit",
]


class ProfileNotFormed(ValueError):
    """The rescaled state cannot yet be normalized into a profile."""


def _lam(q):
    return (q - 1.0) / (q - 2.0)


def extract_profile(v_final: Field, kernel: Kernel, q: float, t0: float) -> Field:
    """Rescale ``v`` so that ``[D f]_0 = (lambda_q/t0) f_0^(q-1)`` at the centre node."""
    grid = v_final.grid
    v = v_final.values
    c0 = grid.M_x
    v0 = v[c0]
    if not v0 > 0:
        raise ProfileNotFormed(f"profile not yet formed: v at the centre is {v0}")
    Dv0 = float(kernel.matrix(grid)[c0] @ v)
    ratio = Dv0 / ((_lam(q) / t0) * v0 ** (q - 1.0))
    if not ratio > 0:
        raise ProfileNotFormed(f"profile not yet formed: [Dv]_0/v_0^(q-1) = {ratio}")
    c = ratio ** (1.0 / (q - 2.0))
    return Field(grid, c * v)


def lane_emden_residual(profile: Field, kernel: Kernel, q: float, t0: float) -> float:
    """``max|D f - (lambda_q/t0) f^(q-1)| / max|D f|``."""
    f = profile.values
    Df = kernel.matrix(profile.grid) @ f
    r = Df - (_lam(q) / t0) * np.sign(f) * np.abs(f) ** (q - 1.0)
    return float(np.max(np.abs(r)) / np.max(np.abs(Df)))


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    nu0: float
    nu_first: float
    profile_alignment: float
    first_eigenvector: np.ndarray

    def predicted_decay_slope(self, q: float) -> float:
        """Slope of the log error while the first decaying mode dominates."""
        return -self.nu0 / (q - 1.0)

    def predicted_growth_slope(self, q: float) -> float:
        return -self.nu_first / (q - 1.0)


def linearized_spectrum(profile: Field, kernel: Kernel, q: float, t0: float) -> SpectralReport:
    """Spectrum of ``A D - (q-1)(lambda_q/t0) I`` via ``A^(1/2) D A^(1/2)``."""
    f = profile.values
    if np.any(f <= 0):
        raise ValueError("profile must be strictly positive on interior nodes")
    D = kernel.matrix(profile.grid)
    r = f ** ((2.0 - q) / 2.0)
    M = r[:, None] * D * r[None, :]
    shift = (q - 1.0) * _lam(q) / t0
    evals, evecs = sla.eigh(M)
    evals = evals - shift
    pos = evals[evals > 0]
    nu0 = float(pos[0]) if pos.size else float("nan")
    # eigenvectors of A D are A^(1/2) y
    x = r * evecs[:, 0]
    align = abs(float(x @ f)) / (np.linalg.norm(x) * np.linalg.norm(f))
    return SpectralReport(evals, nu0, float(evals[0]), align, x / np.linalg.norm(x))


def error_series(traj, profile: Field, kernel: Kernel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``s_n``, X-norm error ``||v^n - f||_X`` and l^q error along a rescaled trajectory."""
    D = kernel.matrix(profile.grid)
    h = profile.grid.h
    f = profile.values
    V = traj.values
    E = V - f[None, :]
    ex = np.sqrt(np.maximum(h * np.einsum("ij,ij->i", E @ D, E), 0.0))
    q = traj.q
    eq = (h * np.sum(np.abs(E) ** q, axis=1)) ** (1.0 / q)
    return traj.times, ex, eq


@dataclass(frozen=True)
class RateFit:
    decay_slope: float
    growth_slope: float
    turn_time: float
    break_index: int
    residual: float

    def __iter__(self):
        return iter((self.decay_slope, self.growth_slope, self.turn_time))


def two_segment_fit(s, y, min_points: int = 20) -> RateFit:
    """Least-squares fit of ``y`` by two lines in ``s`` with one breakpoint.

    Every split leaving at least ``min_points`` on each side is tried; the
    split with the smallest total squared residual wins.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    n = s.size
    if n < 2 * min_points:
        raise ValueError(f"need at least {2 * min_points} points for a two-segment fit, got {n}")
    # prefix sums give each segment's least-squares residual in O(1)
    cs = np.concatenate(([0.0], np.cumsum(s)))
    cy = np.concatenate(([0.0], np.cumsum(y)))
    css = np.concatenate(([0.0], np.cumsum(s * s)))
    csy = np.concatenate(([0.0], np.cumsum(s * y)))
    cyy = np.concatenate(([0.0], np.cumsum(y * y)))

    def seg(a, b):
        m = b - a
        Sx, Sy = cs[b] - cs[a], cy[b] - cy[a]
        Sxx, Sxy, Syy = css[b] - css[a], csy[b] - csy[a], cyy[b] - cyy[a]
        vx = Sxx - Sx * Sx / m
        cxy = Sxy - Sx * Sy / m
        vy = Syy - Sy * Sy / m
        slope = cxy / vx
        return slope, max(vy - slope * cxy, 0.0)

    best = None
    for k in range(min_points, n - min_points + 1):
        s1, r1 = seg(0, k)
        s2, r2 = seg(k, n)
        if best is None or r1 + r2 < best[0]:
            best = (r1 + r2, k, s1, s2)
    res, k, s1, s2 = best
    return RateFit(float(s1), float(s2), float(s[k]), int(k), float(res))


def rate_fit(traj, profile: Field, kernel: Kernel, q: float, *, skip: float = 0.0, min_points: int = 20) -> RateFit:
    """Two-slope fit of ``log ||v^n - f||_X`` against ``s``.

    ``skip`` drops the initial transient ``s < skip`` before fitting.
    """
    s, ex, _ = error_series(traj, profile, kernel)
    keep = (s >= skip) & (ex > 0)
    return two_segment_fit(s[keep], np.log(ex[keep]), min_points)
