import numpy as np
import pytest

from geodrat.errors import DegenerateCofactorError, DomainError, InconsistentCofactorError
from geodrat.services.examples import BESSEL_COFACTOR
from geodrat.services.expression import evaluate, partial_derivative
from geodrat.services.fields import Cofactor, CovectorField
from geodrat.services.flow import initial_states
from geodrat.services.killing import (
    bracket_residual,
    gap_value,
    gauge_transform,
    killing_dimension,
    rkv_dimension,
    rkv_residuals,
    solve_killing,
    solve_rkv_given_cofactor,
)

# The Bessel pair in the gauge b = 0 is e^{−λ}(P, Q).
SCALE = "exp(-x)/sqrt(besselj0(y)^2 + besselj1(y)^2)"
P_PAIR = (f"(x*besselj1(y) - y*besselj0(y))*{SCALE}", f"(y*besselj1(y) + x*besselj0(y))*{SCALE}")
Q_PAIR = (f"besselj1(y)*{SCALE}", f"besselj0(y)*{SCALE}")


def _points(m, count, seed=0):
    rng = np.random.default_rng(seed)
    d = m.domain
    return rng.uniform(d.x_min, d.x_max, count), rng.uniform(d.y_min, d.y_max, count)


def test_translations_and_rotation_are_killing(flat):
    for u, v in (("1", "0"), ("0", "1"), ("-y", "x")):
        residuals = rkv_residuals(flat, u, v, "0", "0", (0.3, -0.2))
        assert max(abs(r) for r in residuals) == 0.0


@pytest.mark.parametrize("pair", [P_PAIR, Q_PAIR])
def test_bessel_pair_satisfies_the_relative_killing_system(bessel, pair):
    residuals = rkv_residuals(bessel, *pair, BESSEL_COFACTOR, "0", _points(bessel, 20))
    assert max(float(np.max(np.abs(r))) for r in residuals) <= 1e-10


@pytest.mark.parametrize("pair", [P_PAIR, Q_PAIR])
def test_bessel_pair_bracket_residual(bessel, pair):
    R, L = CovectorField.of(*pair), Cofactor.of(BESSEL_COFACTOR)
    for state in initial_states(bessel, 20, seed=3):
        assert abs(bracket_residual(bessel, R, L, state)) <= 1e-10


def test_gauge_transform_preserves_the_bracket(bessel):
    R, L = gauge_transform(CovectorField.of(*Q_PAIR), Cofactor.of(BESSEL_COFACTOR), "x*y - y^2/3", bessel.params)
    for state in initial_states(bessel, 10, seed=5):
        assert abs(bracket_residual(bessel, R, L, state)) <= 1e-9


def test_residuals_outside_the_domain(bessel):
    with pytest.raises(DomainError):
        rkv_residuals(bessel, "1", "0", "0", "0", (5.0, 5.0))


def test_gap_of_closed_cofactor_is_curvature_gradient(bessel):
    x, y, u, v = 0.4, 1.1, 0.3, -0.7
    k = bessel.curvature
    k_x = evaluate(partial_derivative(k, 1, 0), x, y)
    k_y = evaluate(partial_derivative(k, 0, 1), x, y)
    expected = 2.0 * np.exp(2.0 * bessel.lambda_values(x, y)) * (k_x * u + k_y * v)
    assert gap_value(bessel, "0", "0", u, v, 0.25, -1.5, (x, y)) == pytest.approx(expected, rel=1e-9)


def test_bessel_cofactor_has_two_dimensional_solution_space(bessel):
    assert rkv_dimension(bessel, Cofactor.of(BESSEL_COFACTOR)) == 2


def test_given_cofactor_solution_has_small_residuals(bessel):
    cof = Cofactor.of(BESSEL_COFACTOR)
    xs, ys = bessel.domain.grid(31, 31)
    R = solve_rkv_given_cofactor(bessel, cof, bessel.domain.center, (1.0, 0.0), grid=(xs, ys))
    gx, gy = np.meshgrid(xs[2:-2], ys[2:-2], indexing="ij")
    residuals = rkv_residuals(bessel, R.u, R.v, cof.a, cof.b, (gx, gy))
    assert max(float(np.max(np.abs(r))) for r in residuals) <= 1e-4


def test_inconsistent_cofactor(bessel):
    cof = Cofactor.of("x*y + 0.3")
    assert rkv_dimension(bessel, cof) == 0
    with pytest.raises(InconsistentCofactorError):
        solve_rkv_given_cofactor(bessel, cof, bessel.domain.center, (1.0, 0.0))


def test_closed_cofactor_is_degenerate(bessel):
    with pytest.raises(DegenerateCofactorError):
        rkv_dimension(bessel, Cofactor.of("x^2"))


@pytest.mark.parametrize("name", ["flat", "sphere"])
def test_constant_curvature_has_three_killing_vectors(request, name):
    space = killing_dimension(request.getfixturevalue(name))
    assert space.dim == 3
    assert space.gap >= 1e3


def test_nonconstant_curvature_has_at_most_one_killing_vector(bessel):
    assert killing_dimension(bessel).dim <= 1


def test_solve_killing_recovers_rotation(flat):
    R = solve_killing(flat, (0.0, 0.0), (0.0, 0.0, -2.0))
    assert R.u.at(0.5, 0.25) == pytest.approx(-0.25, abs=1e-8)
    assert R.v.at(0.5, 0.25) == pytest.approx(0.5, abs=1e-8)
