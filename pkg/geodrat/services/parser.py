"""Expression parser - turns expression text into raw expression trees.

Grammar (whitespace insignificant)::

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := '-' factor | base ('^' exponent)?
    base     := number | 'x' | 'y' | identifier | '(' expr ')' | func '(' expr ')'
    exponent := number | '-' number | '(' ['-'] number ['/' number] ')'

Identifiers outside the function set are parameters. Exponents are rational
literals; a parameter power b is written exp(b*log(base)).
"""

import logging
from fractions import Fraction

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError

from geodrat.errors import ExpressionSyntaxError, UnknownFunctionError, UnknownVariableError
from geodrat.services.expression import (
    VARIABLES,
    Add,
    Const,
    Div,
    Expression,
    Func,
    Mul,
    Neg,
    Param,
    Pow,
    Sub,
    Var,
    is_function,
)

logger = logging.getLogger(__name__)

GRAMMAR = r"""
?start: expr

?expr: term
     | expr "+" term        -> add
     | expr "-" term        -> sub

?term: factor
     | term "*" factor      -> mul
     | term "/" factor      -> div

?factor: power
       | "-" factor         -> neg

?power: atom
      | atom "^" exponent   -> pow
      | atom "^" NAME       -> pow_symbolic

exponent: NUMBER                          -> exp_number
        | "-" NUMBER                      -> exp_negative
        | "(" NUMBER ")"                  -> exp_number
        | "(" "-" NUMBER ")"              -> exp_negative
        | "(" NUMBER "/" NUMBER ")"       -> exp_ratio
        | "(" "-" NUMBER "/" NUMBER ")"   -> exp_negative_ratio

?atom: NUMBER               -> number
     | NAME "(" expr ")"    -> call
     | NAME                 -> name
     | "(" expr ")"

%import common.NUMBER
%import common.CNAME -> NAME
%import common.WS
%ignore WS
"""

_parser = Lark(GRAMMAR, parser="lalr", maybe_placeholders=False)


def _rational(text: str) -> Fraction:
    return Fraction(text)


@v_args(inline=True)
class _TreeBuilder(Transformer):
    def number(self, token):
        return Const(float(token))

    def name(self, token):
        text = str(token)
        if text in VARIABLES:
            return Var(text)
        if is_function(text):
            raise UnknownVariableError(f"'{text}' is a function name, not a variable")
        return Param(text)

    def call(self, token, arg):
        text = str(token)
        if not is_function(text):
            raise UnknownFunctionError(f"unknown function '{text}'")
        return Func(text, arg)

    def add(self, a, b):
        return Add(a, b)

    def sub(self, a, b):
        return Sub(a, b)

    def mul(self, a, b):
        return Mul(a, b)

    def div(self, a, b):
        return Div(a, b)

    def neg(self, a):
        if isinstance(a, Const):
            return Const(-a.value)
        return Neg(a)

    def pow(self, base, exponent):
        return Pow(base, exponent)

    def pow_symbolic(self, base, token):
        raise ExpressionSyntaxError(
            f"exponent '{token}' is not a numeric literal; write exp({token}*log(...)) for a symbolic power",
            token.start_pos,
        )

    def exp_number(self, token):
        return _rational(token)

    def exp_negative(self, token):
        return -_rational(token)

    def exp_ratio(self, num, den):
        return _rational(num) / _rational(den)

    def exp_negative_ratio(self, num, den):
        return -_rational(num) / _rational(den)


def _error_offset(text: str, exc: UnexpectedInput) -> int:
    if isinstance(exc, UnexpectedEOF):
        return len(text.rstrip())
    if isinstance(exc, UnexpectedToken) and exc.token.type == "$END":
        return len(text.rstrip())
    offset = getattr(exc, "pos_in_stream", None)
    return offset if isinstance(offset, int) and offset >= 0 else len(text.rstrip())


def parse_expression(text: str) -> Expression:
    """Parse expression text into a raw (unsimplified) expression tree.

    Raises:
        ExpressionSyntaxError: malformed text, with the character offset.
        UnknownFunctionError: a call to a name outside the function set.
        UnknownVariableError: a function name used without arguments.
    """
    try:
        tree = _parser.parse(text)
    except UnexpectedInput as exc:
        offset = _error_offset(text, exc)
        logger.debug("Syntax error in %r at offset %d", text, offset)
        raise ExpressionSyntaxError("syntax error", offset) from exc

    try:
        return _TreeBuilder().transform(tree)
    except VisitError as exc:
        raise exc.orig_exc from None
