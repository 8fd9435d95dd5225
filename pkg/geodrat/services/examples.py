"""Built-in metrics and the closed-form data of the Bessel example.

Hamiltonians written as (p² + q²)/D are registered with e^{2λ} = D; rescaling H by a
constant changes nothing about its integrals.
"""

import logging

import numpy as np
from scipy.special import j0, j1

from geodrat.errors import ConfigError
from geodrat.models.schemas import DomainModel, ExampleEntry, RunConfig
from geodrat.services.expression import EvalContext
from geodrat.services.geometry import Domain, MetricSpec

logger = logging.getLogger(__name__)

# F = P/Q with P = (xp + yq)J₁ − (yp − xq)J₀ and Q = J₁p + J₀q, as (u, v, w, r)
BESSEL_INTEGRAL = (
    "x*besselj1(y) - y*besselj0(y)",
    "y*besselj1(y) + x*besselj0(y)",
    "besselj1(y)",
    "besselj0(y)",
)
BESSEL_COFACTOR = "besselj0(y)*besselj1(y)/(y*(besselj0(y)^2 + besselj1(y)^2))"

_UNIT = DomainModel(x_min=-1.0, x_max=1.0, y_min=-1.0, y_max=1.0)
_OFF_AXIS = DomainModel(x_min=0.5, x_max=1.5, y_min=0.5, y_max=1.5)

EXAMPLES: dict[str, ExampleEntry] = {
    entry.name: entry
    for entry in (
        ExampleEntry(
            name="bessel",
            conformal_factor="exp(2*x)*(besselj0(y)^2 + besselj1(y)^2)",
            domain=DomainModel(x_min=0.1, x_max=1.0, y_min=0.5, y_max=2.0),
            expected_verdict="exists",
            expected_moduli="points(1)",
            provenance="Bessel metric: a unique fractional-linear integral up to Möbius transformations",
        ),
        ExampleEntry(
            name="h1",
            conformal_factor="x^2 + y^2 + b",
            params={"b": 1.0},
            domain=_OFF_AXIS,
            expected_verdict="none",
            expected_moduli="empty",
            provenance="H1 = (p² + q²)/(x² + y² + b): one Killing vector, no fractional-linear integral",
        ),
        ExampleEntry(
            name="h1-polar",
            conformal_factor="exp(2*x)*(exp(2*x) + b)",
            params={"b": 1.0},
            domain=DomainModel(x_min=-1.0, x_max=0.5, y_min=0.0, y_max=3.0),
            expected_verdict="none",
            expected_moduli="empty",
            provenance="H1 in logarithmic polar coordinates, where λ depends on one variable",
        ),
        ExampleEntry(
            name="h2",
            conformal_factor="x^4 + y^4 + b",
            params={"b": 1.0},
            domain=_OFF_AXIS,
            expected_verdict="none",
            expected_moduli="empty",
            provenance="H2 = (p² + q²)/(x⁴ + y⁴ + b): Φ is nonzero",
        ),
        ExampleEntry(
            name="h1eps",
            conformal_factor="x^2 + eps*y^2",
            params={"eps": 4.0},
            domain=_OFF_AXIS,
            expected_verdict="exists",
            expected_moduli="points(1)",
            provenance="deformation of H1 with b = 0; an integral is known at eps = 4, none for small eps",
        ),
        ExampleEntry(
            name="h2eps",
            conformal_factor="x^4 + eps*y^4",
            params={"eps": 4.0},
            domain=_OFF_AXIS,
            expected_verdict="exists",
            expected_moduli="points(1)",
            provenance="deformation of H2 with b = 0; an integral is known at eps = 4, none at eps = 1.2",
        ),
        ExampleEntry(
            name="revolution",
            lambda_text="x^2",
            domain=DomainModel(x_min=0.2, x_max=1.0, y_min=0.0, y_max=1.0),
            expected_verdict="none",
            expected_moduli="empty",
            provenance="surface of revolution with nonconstant curvature",
        ),
        ExampleEntry(
            name="flat",
            conformal_factor="1",
            domain=_UNIT,
            expected_verdict="constant_curvature",
            expected_moduli="RP2",
            provenance="Euclidean plane",
        ),
        ExampleEntry(
            name="sphere",
            lambda_text="-log(1 + (x^2 + y^2)/4)",
            domain=_UNIT,
            expected_verdict="constant_curvature",
            expected_moduli="RP2",
            provenance="round sphere of curvature 1 in stereographic coordinates",
        ),
    )
}


def get_example(name: str) -> ExampleEntry:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise ConfigError(f"unknown example '{name}'; known: {', '.join(sorted(EXAMPLES))}") from None


def to_domain(model: DomainModel) -> Domain:
    return Domain(model.x_min, model.x_max, model.y_min, model.y_max)


def metric_from_entry(
    entry: ExampleEntry, params: dict[str, float] | None = None, domain: DomainModel | None = None
) -> MetricSpec:
    """The metric of a registry entry, with parameter and domain overrides."""
    ctx = EvalContext({**entry.params, **(params or {})})
    d = to_domain(domain or entry.domain)
    if entry.conformal_factor is not None:
        return MetricSpec.from_conformal_factor(entry.conformal_factor, d, ctx, entry.name)
    return MetricSpec.from_lambda(entry.lambda_text, d, ctx, entry.name)


def build_metric(config: RunConfig) -> MetricSpec:
    """Resolve the metric of a run: a named example, or inline e^{2λ} or λ text."""
    if config.example is not None:
        return metric_from_entry(get_example(config.example), config.params, config.domain)
    if config.domain is None:
        raise ConfigError("a domain is required for a metric given inline")
    ctx = EvalContext(dict(config.params))
    d = to_domain(config.domain)
    if config.conformal_factor is not None:
        return MetricSpec.from_conformal_factor(config.conformal_factor, d, ctx)
    return MetricSpec.from_lambda(config.lambda_text, d, ctx)


def bessel_w(y):
    """a_y of the Bessel cofactor."""
    J0, J1 = j0(y), j1(y)
    s = J0**2 + J1**2
    return (y * (J0**4 - J1**4) - 2.0 * J0**3 * J1) / (y**2 * s**2)


def bessel_a(y):
    J0, J1 = j0(y), j1(y)
    return J0 * J1 / (y * (J0**2 + J1**2))


def bessel_reference_row(xs: np.ndarray, y0: float) -> np.ndarray:
    return np.full(len(xs), float(bessel_a(y0)))
