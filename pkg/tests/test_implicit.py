import math

import numpy as np
import pytest
from scipy.optimize import root

import published
from fracdiff._stepping import NewtonFailure, ScaledState, ScaledStepper
from fracdiff.implicit import run, sample_initial, step
from fracdiff.kernel import Field, Grid, kernel_for_grid
from fracdiff.spaces import lq_norm


@pytest.fixture(scope="module")
def setup():
    g = Grid.from_step(1.0, 0.05)
    return g, kernel_for_grid(0.25, g)


# ---- initial data ---------------------------------------------------------


def test_named_initial_data():
    g = Grid.from_step(1.0, 0.25)
    x = g.nodes
    bump = sample_initial(g, "bump").values
    assert bump[x == 0][0] == 0.25
    assert np.all(bump[np.abs(x) >= 0.5] == 0)
    assert sample_initial(g, "shifted_bump").values[x == -0.25][0] == pytest.approx(1 / 16)
    wide = sample_initial(g, "shifted_bump_wide").values
    assert wide[x == -0.5][0] == pytest.approx(0.25)
    assert np.all(wide[x > 0] == 0)


def test_custom_initial_data():
    g = Grid.from_step(1.0, 0.5)
    assert sample_initial(g, [1, 2, 3]).values.tolist() == [1, 2, 3]
    assert sample_initial(g, lambda x: x + 1).values.tolist() == [0.5, 1.0, 1.5]
    with pytest.raises(ValueError, match="3 nodes"):
        sample_initial(g, [1, 2])
    with pytest.raises(ValueError, match="unknown"):
        sample_initial(g, "gaussian")


# ---- single steps ---------------------------------------------------------


def test_zero_stays_zero(setup):
    g, k = setup
    u, d = step(k, g.zeros(), 0.1, 1.5)
    assert not u.values.any() and d.newton_iterations == 0


def test_single_node_linear_step():
    # one node, q = 2: u (1 + dt S) = u_prev
    g = Grid.from_step(1.0, 1.0)
    k = kernel_for_grid(0.5, g)
    u, _ = step(k, Field(g, [2.0]), 0.3, 2.0)
    assert u.values[0] == pytest.approx(2.0 / (1 + 0.3 * k.total_sum), rel=1e-12)


@pytest.mark.parametrize("q", [1.5, 2.4])
def test_step_matches_scipy_root(setup, q):
    g, k = setup
    D = k.matrix(g)
    u0 = sample_initial(g, "bump").values - 0.05 * np.cos(3 * g.nodes)
    dt = 0.02
    u, _ = step(k, Field(g, u0), dt, q)

    def F(v):
        return np.sign(v) * np.abs(v) ** (q - 1) + dt * D @ v - np.sign(u0) * np.abs(u0) ** (q - 1)

    ref = root(F, u0, tol=1e-14).x
    np.testing.assert_allclose(u.values, ref, rtol=1e-7, atol=1e-10)


@pytest.mark.parametrize("q", [1.5, 2.4])
def test_step_homogeneity(setup, q):
    # c u solves the step from c u_prev with step dt c^(q-2)
    g, k = setup
    u0 = sample_initial(g, "bump")
    c, dt = 1e-3, 0.01
    u, _ = step(k, u0, dt, q)
    v, _ = step(k, u0.scaled(c), dt * c ** (q - 2), q)
    np.testing.assert_allclose(v.values, c * u.values, rtol=1e-8, atol=1e-12 * c)


def test_newton_failure_carries_iterations(setup):
    g, k = setup
    st = ScaledStepper(k.matrix(g), k.total_sum, 1.0, 2.4, tol=1e-16, maxiter=1)
    with pytest.raises(NewtonFailure) as exc:
        st.advance(ScaledState.from_values(sample_initial(g, "bump").values))
    assert exc.value.iterations == 1


# ---- runs -----------------------------------------------------------------


def test_run_of_zero_data(setup):
    g, k = setup
    tr = run(k, g.zeros(), 0.1, 2.4, 5)
    assert tr.n_states == 6 and not tr.values.any()
    assert np.all(np.isneginf(tr.log_lq_norms))


@pytest.mark.parametrize("q", [1.5, 2.4])
def test_run_energy_and_monotonicity(setup, q):
    g, k = setup
    u0 = sample_initial(g, "bump")
    tr = run(k, u0, 0.01, q, 200)
    np.testing.assert_allclose(tr.times, 0.01 * np.arange(201), rtol=1e-15)
    np.testing.assert_array_equal(tr.field(0).values, u0.values)
    assert tr.flags == []
    assert all(d.energy_ok for d in tr.diagnostics)
    assert np.all(np.diff(tr.log_lq_norms) < 0)
    # the energy norm in log form, which stays exact after the values underflow
    assert np.all(np.diff([d.log_xnorm_sq for d in tr.diagnostics]) < 0)
    assert np.all(np.diff(tr.rayleighs) <= 1e-12 * tr.rayleighs[:-1])
    assert tr.newton_iterations[1:].max() < 20
    assert all(d.negative_nodes == 0 for d in tr.diagnostics)
    assert math.exp(tr.log_lq_norms[0]) == pytest.approx(lq_norm(u0, q), rel=1e-13)


def test_fast_diffusion_never_reaches_exact_zero(setup):
    g, k = setup
    tr = run(k, sample_initial(g, "bump"), 0.01, 2.4, 400)
    logs = tr.log_lq_norms
    assert np.all(np.isfinite(logs))
    # extinction happens near t = 1.7: the norm underflows double precision long before t = 4
    assert logs[-1] < -700


def test_sign_changing_data(setup):
    g, k = setup
    tr = run(k, sample_initial(g, "shifted_bump"), 0.01, 1.5, 100)
    assert all(d.energy_ok for d in tr.diagnostics)
    assert np.all(np.diff(tr.log_lq_norms) < 0)


def test_backends_give_the_same_trajectory(setup):
    from fracdiff import _newton_py

    g, k = setup
    u0 = sample_initial(g, "bump")
    a = run(k, u0, 0.005, 2.4, 100)
    b = run(k, u0, 0.005, 2.4, 100, solver=_newton_py.newton_solve)
    np.testing.assert_allclose(a.log_lq_norms, b.log_lq_norms, rtol=1e-12)
    np.testing.assert_allclose(a.shapes, b.shapes, rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("q,T", [(1.5, 10.0), (2.4, 1.8)])
def test_rayleigh_quotients_match_published_runs(setup, q, T):
    # theta = 1/4, h = 0.05, dt = 1e-3, bump datum
    g, k = setup
    dt = 1e-3
    table = published.rayleigh_table(q)
    n_max = max(round(t / dt) for t, _ in table)
    tr = run(k, sample_initial(g, "bump"), dt, q, n_max, check_energy=False)
    ours = tr.rayleighs
    for t, R in table:
        assert ours[round(t / dt)] == pytest.approx(R, rel=1e-6), t
