"""The reference computations agree with each other before anything is compared against them."""
import math

import mpmath as mp
import pytest

import oracles


@pytest.mark.parametrize("theta", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("x", [0.0, 0.1, 0.3, 0.45])
def test_closed_form_matches_principal_value_quadrature(theta, x):
    a = oracles.frac_lap_bump_closed(theta, x)
    b = oracles.frac_lap_bump_pv(theta, x)
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("theta", [0.25, 0.75])
def test_exterior_integral_matches_principal_value_quadrature(theta):
    for x in (0.55, 0.8):
        assert oracles.frac_lap_bump_exterior(theta, x) == pytest.approx(oracles.frac_lap_bump_pv(theta, x), rel=1e-12)


def test_half_laplacian_constant():
    # C_{1,1/2} = 1/pi
    assert float(oracles.c1(0.5)) == pytest.approx(1 / math.pi, rel=1e-15)


def test_oracle_weights_are_symbol_consistent():
    # unit-mesh weights at theta = 1/2 sum to 4/pi
    total = 2 * mp.nsum(lambda j: oracles.mp_unit_weights(0.5, 2000)[int(j) - 1] if j <= 2000 else 0, [1, 2000])
    tail = oracles.mp_total_sum(0.5) - float(total)
    # the remaining tail beyond 2000 behaves like 2 C / (2 theta) 2000^(-2 theta) = 1/(pi 2000)
    assert tail == pytest.approx(2 * (1 / math.pi) / 2000, rel=1e-3)
