import numpy as np
import pytest
from scipy import special

from geodrat.services.special import J1_OVER_X_SERIES_RADIUS, besselj0, besselj1, j1_over_x, jn_over_xn


def test_bessel_values_match_scipy():
    x = np.linspace(0.1, 5.0, 7)
    assert np.allclose(besselj0(x), special.j0(x))
    assert np.allclose(besselj1(x), special.j1(x))


def test_j1_over_x_fills_the_origin():
    assert j1_over_x(0.0) == 0.5
    assert isinstance(j1_over_x(0.3), float)


def test_j1_over_x_is_continuous_across_series_radius():
    r = J1_OVER_X_SERIES_RADIUS
    inside, outside = j1_over_x(r * (1 - 1e-6)), j1_over_x(r * (1 + 1e-6))
    assert abs(inside - outside) < 1e-12


def test_j1_over_x_on_arrays():
    x = np.array([-1.0, 0.0, 2.0])
    expected = np.array([special.j1(-1.0) / -1.0, 0.5, special.j1(2.0) / 2.0])
    assert np.allclose(j1_over_x(x), expected)


def test_jn_over_xn_series_and_direct():
    assert jn_over_xn(1, 0.0) == 0.5
    assert jn_over_xn(2, 0.0) == 0.125
    assert jn_over_xn(3, 0.0) == pytest.approx(1.0 / 48.0)
    x = np.array([0.5, 1.7, 4.0])
    for n in (1, 2, 3):
        assert np.allclose(jn_over_xn(n, x), special.jv(n, x) / x**n)
    r = J1_OVER_X_SERIES_RADIUS
    assert jn_over_xn(2, r * (1 - 1e-6)) == pytest.approx(jn_over_xn(2, r * (1 + 1e-6)), rel=1e-12)
