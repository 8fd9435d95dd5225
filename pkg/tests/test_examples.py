import numpy as np
import pytest
from pydantic import ValidationError

from geodrat.errors import ConfigError
from geodrat.models.schemas import DomainModel, ExampleEntry, RunConfig
from geodrat.services.examples import EXAMPLES, bessel_a, bessel_w, build_metric, get_example, metric_from_entry
from geodrat.services.expression import evaluate


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_every_entry_builds(name):
    m = metric_from_entry(EXAMPLES[name])
    x, y = m.domain.center
    assert np.isfinite(m.lambda_values(x, y))
    assert np.isfinite(evaluate(m.curvature, x, y, m.params))


def test_unknown_example():
    with pytest.raises(ConfigError, match="unknown example 'nope'"):
        get_example("nope")


def test_parameter_override(metric_of):
    default, shifted = metric_of("h1"), metric_of("h1", b=3.0)
    x, y = default.domain.center
    assert np.exp(2 * shifted.lambda_values(x, y)) - np.exp(2 * default.lambda_values(x, y)) == pytest.approx(2.0)


def test_inline_metric_needs_a_domain():
    with pytest.raises(ConfigError):
        build_metric(RunConfig(conformal_factor="1 + x^2"))


def test_inline_lambda_metric():
    config = RunConfig(lambda_text="x", domain=DomainModel(x_min=0.0, x_max=1.0, y_min=0.0, y_max=1.0))
    m = build_metric(config)
    assert m.lambda_values(0.25, 0.5) == pytest.approx(0.25)
    assert m.is_revolution


def test_entry_needs_exactly_one_metric_form():
    with pytest.raises(ValidationError):
        ExampleEntry(
            name="both",
            conformal_factor="1",
            lambda_text="0",
            domain=DomainModel(x_min=0.0, x_max=1.0, y_min=0.0, y_max=1.0),
            expected_verdict="none",
            expected_moduli="empty",
            provenance="",
        )


def test_bessel_w_is_the_derivative_of_the_cofactor():
    ys = np.linspace(0.6, 1.9, 14)
    h = 1e-5
    numeric = (bessel_a(ys + h) - bessel_a(ys - h)) / (2 * h)
    assert np.allclose(bessel_w(ys), numeric, rtol=1e-6, atol=1e-9)
