from fractions import Fraction

import pytest

from geodrat.services.jet_algebra import (
    E,
    JetPolynomial,
    W,
    curvature_jet,
    lam,
    wjet,
)


def test_total_derivative_of_conformal_factor():
    assert E().total_derivative("x").equals(2 * lam(1, 0) * E())
    assert E(-1).total_derivative("y").equals(-2 * lam(0, 1) * E(-1))


def test_total_derivative_of_w_powers():
    assert W(2).total_derivative("y").equals(2 * W() * wjet(0, 1))
    assert W(-1).total_derivative("x").equals(-(wjet(1, 0) * W(-2)))


def test_product_rule():
    p = lam(1, 0) * lam(0, 1)
    expected = lam(2, 0) * lam(0, 1) + lam(1, 0) * lam(1, 1)
    assert p.total_derivative("x").equals(expected)


def test_shifts_cancel():
    assert (W(-1) * W()).equals(JetPolynomial.constant(1))
    assert (E(3) * E(-3) * lam(1, 1)).equals(lam(1, 1))


def test_curvature_jet_matches_definition():
    k = curvature_jet()
    assert k.equals(-(E(-1) * (lam(2, 0) + lam(0, 2))))
    expected_x = 2 * lam(1, 0) * E(-1) * (lam(2, 0) + lam(0, 2)) - E(-1) * (lam(3, 0) + lam(1, 2))
    assert curvature_jet(1, 0).equals(expected_x)


def test_substitute():
    p = lam(2, 0) ** 2 + W()
    assert p.substitute("L_2_0", W(2)).equals(W(4) + W())
    with pytest.raises(ValueError):
        p.substitute("W", lam(1, 0))


def test_exact_quotient():
    assert (lam(1, 0) ** 2 * lam(0, 1)).exquo(lam(1, 0)).equals(lam(1, 0) * lam(0, 1))
    assert lam(1, 0).exquo(lam(0, 1)) is None


def test_degrees_and_coefficients():
    p = 5400 * W(6) + 3 * lam(1, 0) * W(2) + E(-1)
    assert p.degree_in("W") == 6
    coefficients = p.w_coefficients()
    assert set(coefficients) == {6, 2, 0}
    assert coefficients[2].equals(3 * lam(1, 0))


def test_term_lines_round_trip():
    p = 3 * E(-1) * lam(1, 0) ** 2 + W(-1) * wjet(1, 0) / 2 - Fraction(7, 3) * lam(0, 3)
    assert JetPolynomial.from_term_lines(p.term_lines()).equals(p)


def test_limits():
    with pytest.raises(ValueError):
        JetPolynomial.generator("L_1_0", -1)
    with pytest.raises(ValueError):
        wjet(3, 0).total_derivative("x")
    with pytest.raises(ValueError):
        lam(1, 0) ** -1
