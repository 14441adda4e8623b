"""Invariants checked over generated inputs."""
from functools import lru_cache

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracdiff.asymptotics import two_segment_fit
from fracdiff.decay import EnvelopeParams, solve_an, upper_envelope_bn
from fracdiff.extinction import init_bracket
from fracdiff.harness.config import config_record, parse_config
from fracdiff.implicit import step
from fracdiff.kernel import Field, Grid, apply, compute_weights, kernel_for_grid
from fracdiff.spaces import gagliardo_sq, lq_norm, x_inner, x_norm, x_norm_sq
from fracdiff.stationary import optimal_constant

GRID = Grid.from_step(1.0, 0.1)
N = GRID.size

thetas = st.floats(0.02, 0.98)
values = arrays(np.float64, N, elements=st.floats(-1.0, 1.0, allow_subnormal=False))
positive = arrays(np.float64, N, elements=st.floats(0.01, 1.0))


@lru_cache(maxsize=None)
def kern(theta):
    return kernel_for_grid(theta, GRID)


@lru_cache(maxsize=None)
def constant(theta, q):
    return optimal_constant(kern(theta), q, grid=GRID)


@given(thetas, st.floats(1e-3, 1.0), st.integers(3, 300))
def test_weights_positive_and_summable(theta, h, J):
    k = compute_weights(theta, h, J)
    assert np.all(k.weights[1:] > 0)
    assert k.one_sided_tails()[-1] > 0
    assert 2 * np.sum(k.weights) < k.total_sum


@given(st.sampled_from([0.25, 0.5, 0.75]), values, values, st.floats(-3, 3), st.floats(-3, 3))
def test_operator_is_linear(theta, f, g, a, b):
    k = kern(theta)
    lhs = apply(k, Field(GRID, a * f + b * g)).values
    rhs = a * apply(k, Field(GRID, f)).values + b * apply(k, Field(GRID, g)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * k.total_sum * (abs(a) + abs(b) + 1))


def _double_difference(k, f, g):
    """1/2 sum_(i,j) h w_(i-j) (f_i - f_j)(g_i - g_j) over all of Z, with f and g zero outside."""
    n = f.size
    m = GRID.M_x
    i = np.arange(n)
    W = k.weights[np.abs(i[:, None] - i[None, :])]
    inside = 0.5 * np.sum(W * (f[:, None] - f[None, :]) * (g[:, None] - g[None, :]))
    t1 = k.one_sided_tails()
    idx = np.arange(-m, m + 1)
    return GRID.h * (inside + np.sum((t1[m - idx] + t1[m + idx]) * f * g))


@given(st.sampled_from([0.25, 0.5, 0.75]), values, values)
def test_green_identity(theta, f, g):
    k = kern(theta)
    F, G = Field(GRID, f), Field(GRID, g)
    bil = _double_difference(k, f, g)
    assert abs(x_inner(k, F, G) - bil) <= 1e-12 * x_norm(k, F) * x_norm(k, G) + 1e-300
    assert x_norm_sq(k, F) >= 0
    assert abs(x_norm_sq(k, F) - gagliardo_sq(k, F)) <= 1e-12 * x_norm_sq(k, F)


@given(st.sampled_from([0.25, 0.75]), st.sampled_from([1.5, 2.0, 2.4]), values)
def test_poincare_sobolev(theta, q, f):
    F = Field(GRID, f)
    assume(np.any(f != 0))
    assert lq_norm(F, q) <= constant(theta, q) * x_norm(kern(theta), F) * (1 + 1e-10)


@given(values, st.floats(1e-6, 1e6), st.floats(1.1, 4.0))
def test_norms_are_homogeneous(f, c, q):
    k = kern(0.4)
    F = Field(GRID, f)
    np.testing.assert_allclose(lq_norm(F.scaled(c), q), c * lq_norm(F, q), rtol=1e-12)
    np.testing.assert_allclose(x_norm(k, F.scaled(-c)), c * x_norm(k, F), rtol=1e-12, atol=1e-300)


@given(st.sampled_from([0.25, 0.5, 0.75]), st.floats(1.2, 3.5), values, st.floats(1e-3, 1.0))
def test_implicit_step_decreases_norms(theta, q, f, dt):
    assume(np.max(np.abs(f)) > 1e-3)
    k = kern(theta)
    F = Field(GRID, f)
    u, d = step(k, F, dt, q)
    assert lq_norm(u, q) < lq_norm(F, q)
    assert x_norm(k, u) <= x_norm(k, F) * (1 + 1e-12)
    assert d.energy_ok


@given(st.floats(1.2, 3.5), positive, st.floats(1e-3, 0.5), st.floats(1e-3, 1e3))
def test_implicit_step_scaling(q, f, dt, c):
    k = kern(0.5)
    F = Field(GRID, f)
    u, _ = step(k, F, dt, q)
    v, _ = step(k, F.scaled(c), dt * c ** (q - 2), q)
    np.testing.assert_allclose(v.values, c * u.values, rtol=1e-6, atol=1e-9 * c)


@given(
    st.sampled_from([1.3, 1.5, 1.8, 2.2, 2.4, 3.0]),
    st.floats(0.5, 3.0),
    st.floats(0.01, 10.0),
    st.floats(1e-4, 0.1),
    st.integers(1, 500),
)
def test_an_dominates_bn(q, C, u0, dt, n):
    p = EnvelopeParams(q=q, C=C, R0=2 * C**-2, u0_lq=u0, dt=dt)
    a = solve_an(p, n)
    assert upper_envelope_bn(p, n) <= a * (1 + 1e-10)
    assert a <= u0 * (1 + 1e-12)


@given(positive, st.floats(0.1, 10.0))
def test_bracket_homogeneity(f, c):
    k = kern(0.75)
    C = constant(0.75, 2.4)
    F = Field(GRID, f)
    a = init_bracket(k, F, 2.4, C)
    b = init_bracket(k, F.scaled(c), 2.4, C)
    np.testing.assert_allclose([b.t1, b.t2], [c**0.4 * a.t1, c**0.4 * a.t2], rtol=1e-12)
    assert a.t1 < a.t2
    np.testing.assert_allclose(a.mu_h * (a.t2 - a.t1), a.t2, rtol=1e-12)


@given(st.floats(-10, -0.1), st.floats(0.1, 5), st.integers(25, 75), st.integers(25, 75))
def test_two_segment_fit_recovers_exact_corners(m1, m2, n1, n2):
    s = np.arange(n1 + n2) * 0.05
    s0 = s[n1 - 1]
    y = np.where(s <= s0, m1 * s, m1 * s0 + m2 * (s - s0))
    fit = two_segment_fit(s, y)
    assert abs(fit.decay_slope - m1) < 1e-8 * abs(m1) + 1e-9
    assert abs(fit.growth_slope - m2) < 1e-8 * abs(m2) + 1e-9


@given(
    st.sampled_from(["decay", "explicit", "extinction"]),
    st.floats(1.01, 4.0),
    st.sampled_from([0.25, 0.5, 0.75]),
    st.sampled_from([0.5, 0.25, 0.1, 0.05]),
)
def test_config_round_trip(name, q, theta, h):
    text = f"experiment = {name}\nq = {q!r}\ntheta = {theta!r}\nL = 1.0\nh = {h!r}\ninitial = bump\n"
    cfg = parse_config(text)
    rec = config_record(cfg)
    again = parse_config("".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in rec.items() if v not in (None, [], ())))
    assert config_record(again) == rec
