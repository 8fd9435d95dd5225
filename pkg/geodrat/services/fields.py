"""Scalar fields backed by expressions or by sampled grids, and the pairs built from them.

Expression-backed fields differentiate exactly; grid-backed fields use fourth-order
finite-difference stencils (one-sided at the boundary) and quintic splines for
evaluation between nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from geodrat.services.expression import (
    Const,
    EvalContext,
    Expression,
    add,
    compile_expression,
    evaluate,
    mul,
    partial_derivative,
)
from geodrat.services.parser import parse_expression

MIN_STENCIL_POINTS = 5


def stencil_derivative(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order first derivative along ``axis`` of uniformly sampled values."""
    f = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = f.shape[0]
    if n < MIN_STENCIL_POINTS:
        raise ValueError(f"need at least {MIN_STENCIL_POINTS} samples along axis {axis}, got {n}")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    d[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * h)
    d[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * h)
    return np.moveaxis(d, 0, axis)


@runtime_checkable
class Field(Protocol):
    def at(self, x, y, ctx: EvalContext | None = None): ...

    def derivative(self, i: int, j: int) -> Field: ...


@dataclass(frozen=True)
class ExprField:
    expr: Expression

    def at(self, x, y, ctx: EvalContext | None = None):
        return evaluate(self.expr, x, y, ctx)

    def derivative(self, i: int, j: int) -> ExprField:
        return ExprField(partial_derivative(self.expr, i, j))

    def __str__(self) -> str:
        return str(self.expr)


@dataclass(frozen=True, eq=False)
class GridField:
    """Values on the tensor grid xs × ys (array shape (len(xs), len(ys)))."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.xs), len(self.ys)):
            raise ValueError(f"values shape {self.values.shape} does not match grid {len(self.xs)}x{len(self.ys)}")

    @cached_property
    def _spline(self) -> RectBivariateSpline:
        kx = min(5, len(self.xs) - 1)
        ky = min(5, len(self.ys) - 1)
        return RectBivariateSpline(self.xs, self.ys, self.values, kx=kx, ky=ky, s=0)

    def at(self, x, y, ctx: EvalContext | None = None):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        result = self._spline.ev(x, y)
        return float(result) if np.ndim(result) == 0 else result

    def derivative(self, i: int, j: int) -> GridField:
        d = self.values
        for _ in range(i):
            d = stencil_derivative(d, self.xs[1] - self.xs[0], axis=0)
        for _ in range(j):
            d = stencil_derivative(d, self.ys[1] - self.ys[0], axis=1)
        return GridField(self.xs, self.ys, d)

    def combine(self, other: GridField, alpha: float, beta: float) -> GridField:
        return GridField(self.xs, self.ys, alpha * self.values + beta * other.values)


def as_field(value: Field | Expression | str | float) -> Field:
    if isinstance(value, ExprField | GridField):
        return value
    if isinstance(value, Expression):
        return ExprField(value)
    if isinstance(value, str):
        return ExprField(parse_expression(value))
    return ExprField(Const(float(value)))


def sample(f: Field, xs: np.ndarray, ys: np.ndarray, ctx: EvalContext | None = None) -> GridField:
    if isinstance(f, GridField) and f.values.shape == (len(xs), len(ys)) and np.allclose(f.xs, xs) and np.allclose(f.ys, ys):
        return f
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return GridField(xs, ys, np.broadcast_to(np.asarray(f.at(gx, gy, ctx), dtype=float), gx.shape).copy())


def combine_fields(
    f: Field, g: Field, alpha: float, beta: float, grid: tuple[np.ndarray, np.ndarray] | None = None,
    ctx: EvalContext | None = None,
) -> Field:
    """alpha·f + beta·g, symbolic when both are expression-backed."""
    if isinstance(f, ExprField) and isinstance(g, ExprField):
        return ExprField(add(mul(Const(alpha), f.expr), mul(Const(beta), g.expr)))
    if grid is None:
        grid_field = f if isinstance(f, GridField) else g
        grid = (grid_field.xs, grid_field.ys)
    return sample(f, *grid, ctx).combine(sample(g, *grid, ctx), alpha, beta)


@dataclass(frozen=True)
class CovectorField:
    """R = u·p + v·q."""

    u: Field
    v: Field

    @classmethod
    def of(cls, u, v) -> CovectorField:
        return cls(as_field(u), as_field(v))

    def components(self, x, y, ctx: EvalContext | None = None):
        return self.u.at(x, y, ctx), self.v.at(x, y, ctx)

    def value(self, x, y, p, q, ctx: EvalContext | None = None):
        u, v = self.components(x, y, ctx)
        return u * p + v * q

    def combine(self, other: CovectorField, alpha: float, beta: float, ctx: EvalContext | None = None) -> CovectorField:
        return CovectorField(
            combine_fields(self.u, other.u, alpha, beta, ctx=ctx),
            combine_fields(self.v, other.v, alpha, beta, ctx=ctx),
        )


@dataclass(frozen=True)
class Cofactor:
    """L = e^{−2λ}(a·p + b·q); ρ = b_x − a_y, and w = a_y in the gauge b = 0."""

    a: Field
    b: Field = field(default_factory=lambda: ExprField(Const(0.0)))

    @classmethod
    def of(cls, a, b=0.0) -> Cofactor:
        return cls(as_field(a), as_field(b))

    def rho(self, x, y, ctx: EvalContext | None = None):
        return self.b.derivative(1, 0).at(x, y, ctx) - self.a.derivative(0, 1).at(x, y, ctx)

    def rho_gradient(self, x, y, ctx: EvalContext | None = None):
        rho_x = self.b.derivative(2, 0).at(x, y, ctx) - self.a.derivative(1, 1).at(x, y, ctx)
        rho_y = self.b.derivative(1, 1).at(x, y, ctx) - self.a.derivative(0, 2).at(x, y, ctx)
        return rho_x, rho_y

    def w(self, x, y, ctx: EvalContext | None = None):
        return self.a.derivative(0, 1).at(x, y, ctx)


def compiled(f: Field, ctx: EvalContext | None = None):
    """A fast ``(x, y) -> value`` callable for hot loops."""
    if isinstance(f, ExprField):
        return compile_expression(f.expr, ctx)
    return lambda x, y: f.at(x, y, ctx)
