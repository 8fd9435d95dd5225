import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geodrat.services.fields import (
    Cofactor,
    CovectorField,
    ExprField,
    GridField,
    as_field,
    combine_fields,
    sample,
    stencil_derivative,
)


@given(st.lists(st.floats(-3.0, 3.0), min_size=5, max_size=5))
def test_stencil_is_exact_for_quartics(coeffs):
    xs = np.linspace(-1.0, 2.0, 13)
    poly = np.poly1d(coeffs)
    d = stencil_derivative(poly(xs), xs[1] - xs[0], axis=0)
    assert np.allclose(d, poly.deriv()(xs), atol=1e-9 * (1.0 + max(abs(c) for c in coeffs)))


def test_stencil_along_second_axis():
    xs, ys = np.linspace(0, 1, 6), np.linspace(0, 2, 9)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    d = stencil_derivative(gx * gy**3, ys[1] - ys[0], axis=1)
    assert np.allclose(d, 3 * gx * gy**2)


def test_stencil_needs_five_points():
    with pytest.raises(ValueError):
        stencil_derivative(np.zeros(4), 0.1, axis=0)


def test_grid_field_shape_is_checked():
    with pytest.raises(ValueError):
        GridField(np.linspace(0, 1, 5), np.linspace(0, 1, 6), np.zeros((6, 5)))


def test_sampled_field_interpolates_between_nodes():
    xs, ys = np.linspace(0, 1, 11), np.linspace(0, 1, 11)
    g = sample(as_field("x*y^2 + x^3"), xs, ys)
    assert g.at(0.33, 0.71) == pytest.approx(0.33 * 0.71**2 + 0.33**3, abs=1e-8)
    assert g.derivative(1, 0).at(0.5, 0.5) == pytest.approx(0.25 + 0.75, abs=1e-8)


def test_sample_returns_matching_grid_fields_unchanged():
    xs, ys = np.linspace(0, 1, 6), np.linspace(0, 1, 7)
    g = sample(as_field("x + y"), xs, ys)
    assert sample(g, xs, ys) is g


def test_combine_stays_symbolic_for_expressions():
    f = combine_fields(as_field("x"), as_field("y"), 2.0, -1.0)
    assert isinstance(f, ExprField)
    assert f.at(3.0, 1.0) == pytest.approx(5.0)


def test_combine_mixed_fields_on_the_grid():
    xs, ys = np.linspace(0, 1, 6), np.linspace(0, 1, 6)
    g = sample(as_field("x"), xs, ys)
    f = combine_fields(g, as_field("y"), 1.0, 1.0)
    assert isinstance(f, GridField)
    assert np.allclose(f.values, np.add.outer(xs, ys))


def test_covector_value():
    R = CovectorField.of("-y", "x")
    assert R.value(1.0, 2.0, 3.0, 4.0) == pytest.approx(-2.0 * 3.0 + 1.0 * 4.0)


def test_cofactor_rho_and_w():
    L = Cofactor.of("x*y", "x^2")
    assert L.rho(2.0, 5.0) == pytest.approx(2.0)  # b_x − a_y = 2x − x
    assert L.w(2.0, 5.0) == pytest.approx(2.0)
    assert L.rho_gradient(2.0, 5.0) == pytest.approx((1.0, 0.0))
