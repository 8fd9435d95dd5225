import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from geodrat.errors import EvaluationDomainError, UnboundParameterError
from geodrat.services.expression import (
    Const,
    EvalContext,
    Mul,
    Pow,
    Var,
    compile_expression,
    differentiate,
    evaluate,
    mul,
    parameters,
    partial_derivative,
    simplify,
    substitute_parameters,
)
from geodrat.services.parser import parse_expression


def test_simplify_folds_identities():
    assert simplify(parse_expression("0*x + 1*y")) == Var("y")
    assert simplify(parse_expression("x*x")) == Pow(Var("x"), 2)
    assert simplify(parse_expression("exp(log(x))")) == Var("x")
    assert simplify(parse_expression("(x^2)^3")) == Pow(Var("x"), 6)


def test_known_derivatives():
    e = parse_expression("x^3*exp(y) + sin(x*y)")
    dx, dy = differentiate(e, "x"), differentiate(e, "y")
    x, y = 0.7, -0.4
    assert evaluate(dx, x, y) == pytest.approx(3 * x**2 * math.exp(y) + y * math.cos(x * y))
    assert evaluate(dy, x, y) == pytest.approx(x**3 * math.exp(y) + x * math.cos(x * y))


def test_bessel_derivatives():
    u = 1.3
    d0 = differentiate(parse_expression("besselj0(x)"), "x")
    d1 = differentiate(parse_expression("besselj1(x)"), "x")
    assert evaluate(d0, u, 0.0) == pytest.approx(-special.j1(u))
    assert evaluate(d1, u, 0.0) == pytest.approx(special.j0(u) - special.j1(u) / u)


def test_mixed_partials_commute():
    e = parse_expression("exp(x*y)/(1 + x^2 + y^2)")
    a = evaluate(partial_derivative(e, 2, 1), 0.3, 0.5)
    b = evaluate(differentiate(differentiate(differentiate(e, "y"), "x"), "x"), 0.3, 0.5)
    assert a == pytest.approx(b, rel=1e-10)
    assert partial_derivative(e, 0, 0) is e


def test_negative_multi_index_is_rejected():
    with pytest.raises(ValueError):
        partial_derivative(Var("x"), -1, 0)


def test_parameters_and_substitution():
    e = parse_expression("b*x + eps*y^2")
    assert parameters(e) == {"b", "eps"}
    with pytest.raises(UnboundParameterError):
        evaluate(e, 1.0, 1.0)
    ctx = EvalContext({"b": 2.0, "eps": 3.0})
    assert evaluate(e, 1.0, 2.0, ctx) == pytest.approx(14.0)
    fixed = substitute_parameters(e, ctx)
    assert parameters(fixed) == set()
    assert evaluate(fixed, 1.0, 2.0) == pytest.approx(14.0)


@pytest.mark.parametrize(("text", "x"), [("log(x)", -1.0), ("1/x", 0.0), ("sqrt(x)", -0.5), ("x^(1/2)", -2.0)])
def test_domain_errors(text, x):
    with pytest.raises(EvaluationDomainError):
        evaluate(parse_expression(text), x, 0.0)


def test_removable_bessel_quotient_at_zero():
    e = parse_expression("besselj1(y)/y")
    assert evaluate(e, 0.0, 0.0) == 0.5
    assert evaluate(e, 0.0, 2.0) == pytest.approx(special.j1(2.0) / 2.0)


def test_array_evaluation_broadcasts():
    e = parse_expression("1 + 0*x")
    gx, gy = np.meshgrid(np.linspace(0, 1, 3), np.linspace(0, 1, 4), indexing="ij")
    values = evaluate(e, gx, gy)
    assert values.shape == (3, 4)
    assert np.all(values == 1.0)


def test_compiled_matches_evaluate():
    e = parse_expression("exp(2*x)*(besselj0(y)^2 + besselj1(y)^2) - b*cos(x)")
    ctx = EvalContext({"b": 0.5})
    gx, gy = np.meshgrid(np.linspace(0.1, 1, 5), np.linspace(0.5, 2, 6), indexing="ij")
    assert np.allclose(compile_expression(e, ctx)(gx, gy), evaluate(e, gx, gy, ctx))


_polys = st.recursive(
    st.one_of(st.sampled_from([Var("x"), Var("y")]), st.integers(-5, 5).map(lambda n: Const(float(n)))),
    lambda children: st.one_of(
        st.tuples(children, children).map(lambda t: t[0] + t[1]),
        st.tuples(children, children).map(lambda t: t[0] * t[1]),
        st.tuples(children, st.integers(0, 3)).map(lambda t: t[0] ** t[1]),
    ),
    max_leaves=6,
)


@settings(max_examples=50, deadline=None)
@given(_polys, st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_product_rule(e, x, y):
    square = mul(e, Mul(Const(1.0), e))
    lhs = evaluate(differentiate(square, "x"), x, y)
    rhs = 2.0 * evaluate(e, x, y) * evaluate(differentiate(e, "x"), x, y)
    assert math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-9)


def test_higher_bessel_derivatives_are_finite_at_zero():
    e = parse_expression("besselj1(y)")
    second, third = partial_derivative(e, 0, 2), partial_derivative(e, 0, 3)
    assert evaluate(second, 0.0, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert evaluate(third, 0.0, 0.0) == pytest.approx(-0.375)
    for y in (0.7, 2.5):
        assert evaluate(second, 0.0, y) == pytest.approx(special.jvp(1, y, 2))
        assert evaluate(third, 0.0, y) == pytest.approx(special.jvp(1, y, 3))
    ys = np.array([0.0, 1e-6, 0.7])
    assert np.allclose(compile_expression(third)(np.zeros(3), ys), evaluate(third, np.zeros(3), ys))
