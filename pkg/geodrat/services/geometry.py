"""Isothermal metrics g = e^{2λ}(dx² + dy²): Hamiltonian, curvature and invariants."""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from geodrat.errors import DomainError, MetricFormError
from geodrat.services.expression import (
    Const,
    EvalContext,
    Expression,
    evaluate,
    log,
    mul,
    neg,
    partial_derivative,
    add,
    exp,
)
from geodrat.services.parser import parse_expression

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 21
REVOLUTION_TOL = 1e-10


@dataclass(frozen=True)
class Domain:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"domain must have positive area: {self}")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def grid(self, nx: int = DEFAULT_SAMPLES, ny: int = DEFAULT_SAMPLES) -> tuple[np.ndarray, np.ndarray]:
        """1-D node coordinates of a uniform nx × ny grid covering the domain."""
        return np.linspace(self.x_min, self.x_max, nx), np.linspace(self.y_min, self.y_max, ny)

    def mesh(self, nx: int = DEFAULT_SAMPLES, ny: int = DEFAULT_SAMPLES) -> tuple[np.ndarray, np.ndarray]:
        xs, ys = self.grid(nx, ny)
        return np.meshgrid(xs, ys, indexing="ij")

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max)


@dataclass(frozen=True)
class PhaseState:
    """A covector (p, q) at the point (x, y)."""

    x: float
    y: float
    p: float
    q: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.p, self.q], dtype=float)

    @classmethod
    def from_array(cls, values) -> "PhaseState":
        x, y, p, q = (float(v) for v in values)
        return cls(x, y, p, q)


@dataclass(frozen=True)
class MetricSpec:
    """Metric e^{2λ}(dx² + dy²) on a rectangle, with parameter bindings."""

    lam: Expression
    domain: Domain
    params: EvalContext = field(default_factory=EvalContext)
    name: str = "custom"

    def __post_init__(self) -> None:
        # e^{2λ} > 0 holds wherever λ is finite; sample that λ is defined and finite.
        values = self.lambda_values(*self.domain.mesh(9, 9))
        if not np.all(np.isfinite(values)):
            raise MetricFormError(f"conformal factor of '{self.name}' is not finite on the domain")

    @classmethod
    def from_conformal_factor(
        cls, text: str, domain: Domain, params: EvalContext | None = None, name: str = "custom"
    ) -> "MetricSpec":
        """Build from the text of e^{2λ}, i.e. λ = ½ log(factor)."""
        factor = parse_expression(text)
        return cls(mul(Const(0.5), log(factor)), domain, params or EvalContext(), name)

    @classmethod
    def from_lambda(
        cls, text: str, domain: Domain, params: EvalContext | None = None, name: str = "custom"
    ) -> "MetricSpec":
        return cls(parse_expression(text), domain, params or EvalContext(), name)

    def lambda_partial(self, i: int, j: int) -> Expression:
        return partial_derivative(self.lam, i, j)

    def lambda_values(self, x, y, i: int = 0, j: int = 0):
        return evaluate(self.lambda_partial(i, j), x, y, self.params)

    def require_inside(self, x: float, y: float) -> None:
        if not self.domain.contains(x, y):
            raise DomainError(f"point ({x}, {y}) lies outside the domain of '{self.name}'")

    @cached_property
    def curvature(self) -> Expression:
        return curvature_expr(self)

    @cached_property
    def is_revolution(self) -> bool:
        """λ_y ≡ 0 on the sampling grid."""
        lam_y = self.lambda_values(*self.domain.mesh(), 0, 1)
        return bool(np.max(np.abs(lam_y)) <= REVOLUTION_TOL)


@dataclass(frozen=True)
class InvariantFrame:
    k: float
    grad_k: tuple[float, float]
    k_xx: float
    j: float


def curvature_expr(m: MetricSpec) -> Expression:
    """Gaussian curvature k = −e^{−2λ}(λ_xx + λ_yy) as an expression."""
    laplacian = add(partial_derivative(m.lam, 2, 0), partial_derivative(m.lam, 0, 2))
    return neg(mul(exp(mul(Const(-2.0), m.lam)), laplacian))


def hamiltonian(m: MetricSpec, state: PhaseState) -> float:
    """H = ½ e^{−2λ}(p² + q²)."""
    m.require_inside(state.x, state.y)
    lam = m.lambda_values(state.x, state.y)
    return 0.5 * np.exp(-2.0 * lam) * (state.p**2 + state.q**2)


def is_constant_curvature(
    m: MetricSpec, tol: float, nx: int = DEFAULT_SAMPLES, ny: int = DEFAULT_SAMPLES
) -> tuple[bool, float]:
    """Whether k is constant on the sampling grid, with the estimated mean curvature."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = evaluate(m.curvature, *m.domain.mesh(nx, ny), m.params)
    mean = float(np.mean(k))
    spread = float(np.max(np.abs(k - mean)))
    constant = spread <= tol * (1.0 + abs(mean))
    logger.debug("Curvature of '%s': mean=%.6g spread=%.3g constant=%s", m.name, mean, spread, constant)
    return constant, mean


def revolution_invariants(m: MetricSpec, x: float) -> InvariantFrame:
    """k, ∇k, k_xx and j = e^{−λ}λ_x of a metric with λ_y ≡ 0, at abscissa x."""
    if not m.is_revolution:
        raise MetricFormError(f"metric '{m.name}' is not of revolution form (λ_y ≢ 0)")
    y = m.domain.center[1]
    k = m.curvature
    values = [evaluate(partial_derivative(k, i, 0), x, y, m.params) for i in range(3)]
    lam, lam_x = m.lambda_values(x, y), m.lambda_values(x, y, 1, 0)
    return InvariantFrame(
        k=values[0],
        grad_k=(values[1], 0.0),
        k_xx=values[2],
        j=float(np.exp(-lam) * lam_x),
    )
