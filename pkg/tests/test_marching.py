import numpy as np
import pytest

from geodrat.errors import CharacteristicCollisionError, MarchingBreakdownError, StepUnderflowError
from geodrat.services.geometry import Domain, MetricSpec
from geodrat.services.killing import max_residual
from geodrat.services.marching import characteristic_w, ck_march, rk4_step


def test_rk4_step_is_exact_for_cubics():
    state = rk4_step(lambda y, s: np.array([3 * y**2]), 0.0, np.array([0.0]), 0.5)
    assert state[0] == pytest.approx(0.125)


def test_ck_march_on_flat_metric_with_constant_data(flat):
    xs = np.linspace(-1.0, 1.0, 11)
    result = ck_march(flat, xs, -1.0, (1.0, 0.0, 0.0), n_steps=40)
    assert np.allclose(result.u.values, 1.0)
    assert np.allclose(result.v.values, 0.0)
    assert result.ys[-1] == pytest.approx(1.0)
    assert max_residual(flat, result.covector, result.cofactor, result.xs, result.ys) <= 1e-12


def test_ck_march_reports_where_u_vanishes(flat):
    xs = np.linspace(-1.0, 1.0, 11)
    with pytest.raises(MarchingBreakdownError) as info:
        ck_march(flat, xs, -1.0, (xs, 0.0, 0.0), n_steps=10)
    assert info.value.height == -1.0


def test_ck_march_step_underflow(flat):
    with pytest.raises(StepUnderflowError):
        ck_march(flat, np.linspace(-1.0, 1.0, 11), -1.0, (1.0, 0.0, 0.0), height=1e-14, n_steps=10)


def test_ck_march_strip_must_stay_inside(flat):
    with pytest.raises(MarchingBreakdownError):
        ck_march(flat, np.linspace(-1.0, 1.0, 11), 0.5, (1.0, 0.0, 0.0), height=1.0)


@pytest.fixture(scope="module")
def linear_lambda():
    return MetricSpec.from_lambda("x", Domain(0.0, 2.0, 0.0, 1.0), name="linear")


def test_characteristics_with_linear_lambda(linear_lambda):
    xs = np.linspace(0.0, 1.0, 21)
    result = characteristic_w(linear_lambda, xs, 0.0, 0.0, n_steps=400)
    # w_y = −(w² + 1) along straight-up data, so w = −tan(y)
    assert np.allclose(result.w.values[:, -1], -np.tan(1.0), atol=1e-9)
    assert result.xs[0] == pytest.approx(-np.log(np.cos(1.0)), abs=1e-9)
    # λ_y = 0 makes b = w − w_x, and w_x = 0 here
    assert np.allclose(result.cofactor.b.values, result.w.values, atol=1e-8)
    assert max_residual(linear_lambda, result.covector, result.cofactor, result.xs, result.ys) <= 1e-6


def test_crossing_characteristics(flat):
    xs = np.linspace(-1.0, 1.0, 21)
    with pytest.raises(CharacteristicCollisionError) as info:
        characteristic_w(flat, xs, -1.0, 2.0 * xs, n_steps=400)
    assert info.value.locus[1] == pytest.approx(-0.5, abs=0.02)
