from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from geodrat.errors import ExpressionSyntaxError, UnknownFunctionError, UnknownVariableError
from geodrat.services.expression import FUNCTIONS, Add, Const, Div, Func, Mul, Neg, Param, Pow, Sub, Var, evaluate
from geodrat.services.parser import parse_expression


@pytest.mark.parametrize(
    ("text", "x", "y", "expected"),
    [
        ("x^2 + 3*y", 2.0, 1.0, 7.0),
        ("2 + 3*4^2", 0.0, 0.0, 50.0),
        ("-x^2", 3.0, 0.0, -9.0),
        ("x^(1/2)", 4.0, 0.0, 2.0),
        ("x^-1", 4.0, 0.0, 0.25),
        ("x^(-3/2)", 4.0, 0.0, 0.125),
        ("(x - y)/(x + y)", 3.0, 1.0, 0.5),
        ("exp(0)*cos(0) + sin(0)", 0.0, 0.0, 1.0),
        ("1e-2*x", 100.0, 0.0, 1.0),
    ],
)
def test_parse_and_evaluate(text, x, y, expected):
    assert evaluate(parse_expression(text), x, y) == pytest.approx(expected)


def test_identifiers_outside_the_function_set_are_parameters():
    e = parse_expression("b*x + eps")
    assert isinstance(e, Add)
    assert e.right == Param("eps")


def test_syntax_error_reports_offset():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression("x + * y")
    assert info.value.offset == 4


def test_truncated_input_reports_end_offset():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression("x + ")
    assert info.value.offset == 3


def test_unknown_function():
    with pytest.raises(UnknownFunctionError):
        parse_expression("foo(x)")


def test_function_name_without_argument():
    with pytest.raises(UnknownVariableError):
        parse_expression("exp + 1")


_leaves = st.one_of(
    st.sampled_from([Var("x"), Var("y"), Param("b"), Param("eps")]),
    st.floats(min_value=0.0, max_value=100.0, allow_nan=False, allow_infinity=False).map(Const),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from([Add, Sub, Mul, Div]), children, children).map(lambda t: t[0](t[1], t[2])),
        children.filter(lambda e: not isinstance(e, Const)).map(Neg),
        st.tuples(children, st.fractions(min_value=-3, max_value=3, max_denominator=4)).map(
            lambda t: Pow(t[0], Fraction(t[1]))
        ),
        st.tuples(st.sampled_from(FUNCTIONS), children).map(lambda t: Func(t[0], t[1])),
    )


@given(st.recursive(_leaves, _extend, max_leaves=10))
def test_printing_round_trips_structurally(e):
    assert parse_expression(str(e)) == e


def test_symbolic_exponent_is_rejected_with_offset():
    with pytest.raises(ExpressionSyntaxError, match="not a numeric literal") as info:
        parse_expression("x^b + 1")
    assert info.value.offset == 2


def test_bessel_ratio_names_parse():
    assert parse_expression("besselratio2(y)") == Func("besselratio2", Var("y"))
    with pytest.raises(UnknownFunctionError):
        parse_expression("besselratio0(y)")
