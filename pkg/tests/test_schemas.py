import pytest
from pydantic import ValidationError

from geodrat.config import Settings
from geodrat.models.schemas import AnalyzeRequest, DomainModel, RunConfig, Tolerances, VerifyRequest


def test_domain_needs_positive_area():
    with pytest.raises(ValidationError):
        DomainModel(x_min=1.0, x_max=1.0, y_min=0.0, y_max=1.0)


def test_run_config_needs_one_source():
    with pytest.raises(ValidationError):
        RunConfig()
    with pytest.raises(ValidationError):
        RunConfig(example="flat", conformal_factor="1")


def test_run_config_limits():
    with pytest.raises(ValidationError):
        RunConfig(example="flat", grid=(4, 10))
    with pytest.raises(ValidationError):
        RunConfig(example="flat", trajectories=0)
    with pytest.raises(ValidationError):
        RunConfig(example="flat", tolerances=Tolerances(phi_accept=1e-2, phi_reject=1e-3))


def test_defaults_follow_settings():
    config = RunConfig(example="flat")
    assert config.tolerances.phi_accept == 1e-6
    assert config.tolerances.phi_reject == 1e-3
    assert config.grid == (21, 21)


def test_request_to_config():
    config = AnalyzeRequest(example="h1", params={"b": 2.0}, grid=(11, 11)).to_config()
    assert config.params == {"b": 2.0}
    assert config.grid == (11, 11)


def test_verify_request_bounds():
    integral = {"u": "1", "v": "0", "w": "0", "r": "1"}
    with pytest.raises(ValidationError):
        VerifyRequest(example="flat", integral=integral, trajectories=0)
    with pytest.raises(ValidationError):
        VerifyRequest(example="flat", integral=integral, t_end=0.0)


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("GEODRAT_THREADS", "3")
    monkeypatch.setenv("GEODRAT_PHI_REJECT", "0.01")
    s = Settings()
    assert s.threads == 3
    assert s.phi_reject == 0.01
