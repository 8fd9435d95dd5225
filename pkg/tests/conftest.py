import pytest

from geodrat.services.derivation import derived_system
from geodrat.services.examples import EXAMPLES, metric_from_entry


@pytest.fixture(scope="session")
def system():
    return derived_system()


def _metric(name: str, **params: float):
    return metric_from_entry(EXAMPLES[name], params or None)


@pytest.fixture(scope="session")
def bessel():
    return _metric("bessel")


@pytest.fixture(scope="session")
def flat():
    return _metric("flat")


@pytest.fixture(scope="session")
def sphere():
    return _metric("sphere")


@pytest.fixture(scope="session")
def h2():
    return _metric("h2")


@pytest.fixture(scope="session")
def revolution():
    return _metric("revolution")


@pytest.fixture(scope="session")
def metric_of():
    """Build a registry metric with parameter overrides."""
    return _metric
