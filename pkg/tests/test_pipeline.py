import json

import pytest

from geodrat.errors import ConfigError
from geodrat.models.schemas import IntegralSpec, RunConfig
from geodrat.services import pipeline


def test_derive_writes_the_dump(tmp_path):
    report = pipeline.derive(tmp_path)
    assert report.command == "derive"
    assert report.result.consistent
    assert (tmp_path / pipeline.DERIVED_DUMP).exists()
    assert sorted(report.result.degrees.values()) == [6, 7, 8, 10]


def test_analyze_flat():
    report = pipeline.analyze(RunConfig(example="flat"))
    assert report.result.verdict == "constant_curvature"
    assert report.config.example == "flat"


def test_verify_flat_momentum_ratio():
    config = RunConfig(example="flat", trajectories=5, t_end=2.0, seed=3)
    report = pipeline.verify(config, pipeline.default_integral(config))
    assert report.result.max_drift <= 1e-10
    assert len(report.result.trajectories) == 5
    assert report.result.seed == 3


def test_verify_writes_csv(tmp_path):
    config = RunConfig(example="flat", trajectories=2, t_end=1.0)
    pipeline.verify(config, IntegralSpec(u="1", v="0", w="0", r="1"), tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["trajectory_000.csv", "trajectory_001.csv"]


def test_default_integral_is_only_known_for_some_examples():
    with pytest.raises(ConfigError):
        pipeline.default_integral(RunConfig(example="h2"))


def test_rkv_ck_on_flat():
    report = pipeline.rkv(RunConfig(example="flat", grid=(11, 11)), "ck")
    assert report.result.max_residual <= 1e-10
    assert report.result.error_estimate is not None


def test_rkv_characteristics_on_flat():
    report = pipeline.rkv(RunConfig(example="flat", grid=(21, 11)), "characteristics")
    assert report.result.max_residual <= 1e-10


def test_rkv_given_bessel_cofactor():
    report = pipeline.rkv(RunConfig(example="bessel", grid=(21, 21)), "given-cofactor")
    assert report.result.dimension == 2
    assert report.result.max_residual <= 1e-3


def test_rkv_needs_a_cofactor():
    with pytest.raises(ConfigError):
        pipeline.rkv(RunConfig(example="h1"), "given-cofactor")


@pytest.mark.parametrize("method", ["dop853", "midpoint"])
def test_geodesic_csv(tmp_path, method):
    report = pipeline.geodesic(RunConfig(example="sphere", t_end=1.0), tmp_path, count=2, method=method)
    assert report.result.count == 2
    assert len(report.result.csv_paths) == 2
    assert report.result.max_energy_drift <= 1e-3


def test_reports_are_deterministic():
    config = RunConfig(example="flat", trajectories=3, t_end=1.0, seed=9)
    integral = pipeline.default_integral(config)
    first = pipeline.verify(config, integral).model_dump_json()
    assert first == pipeline.verify(config, integral).model_dump_json()
    assert json.loads(first)["tool"] == "geodrat"
