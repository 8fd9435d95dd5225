import json

import pytest
from typer.testing import CliRunner

from geodrat.cli import app
from geodrat.services.examples import EXAMPLES

runner = CliRunner()


def test_examples_json():
    result = runner.invoke(app, ["examples"])
    assert result.exit_code == 0
    names = [entry["name"] for entry in json.loads(result.stdout)]
    assert names == list(EXAMPLES)


def test_examples_csv():
    result = runner.invoke(app, ["examples", "--format", "csv"])
    assert result.exit_code == 0
    lines = result.stdout.strip().splitlines()
    assert len(lines) == len(EXAMPLES)
    assert lines[0].startswith("bessel,exp(2*x)*")
    assert lines[0].endswith(",exists,points(1)")


def test_analyze_flat(tmp_path):
    result = runner.invoke(app, ["analyze", "--example", "flat", "--out", str(tmp_path)])
    assert result.exit_code == 0
    report = json.loads((tmp_path / "analyze.json").read_text(encoding="utf-8"))
    assert report["result"]["verdict"] == "constant_curvature"


@pytest.mark.parametrize(
    ("example", "verdict", "moduli"),
    [
        ("h2", "none", "empty"),
        ("revolution", "none", "empty"),
        pytest.param("bessel", "exists", "points(1)", marks=pytest.mark.slow),
    ],
)
def test_analyze_examples_end_to_end(example, verdict, moduli, tmp_path):
    result = runner.invoke(app, ["analyze", "--example", example, "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "analyze.json").read_text(encoding="utf-8"))
    assert report["result"]["verdict"] == verdict
    assert report["result"]["moduli"] == moduli


@pytest.mark.parametrize(
    "args",
    [
        ["analyze", "--example", "nope"],
        ["analyze", "--example", "h1", "--param", "b"],
        ["analyze", "--inline", "1 + x^2"],
        ["analyze", "--example", "flat", "--grid", "3,3"],
        ["verify", "--example", "flat", "--u", "1"],
    ],
)
def test_errors_exit_with_one(args, tmp_path):
    result = runner.invoke(app, [*args, "--out", str(tmp_path)])
    assert result.exit_code == 1


def test_verify_writes_csv(tmp_path):
    result = runner.invoke(
        app,
        ["verify", "--example", "flat", "--trajectories", "2", "--t-end", "1", "--format", "csv", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0
    assert len(list((tmp_path / "verify").glob("trajectory_*.csv"))) == 2
    assert (tmp_path / "verify.json").exists()


def test_metric_file(tmp_path):
    metric = tmp_path / "metric.toml"
    metric.write_text(
        'lambda = "-log(1 + (x^2 + y^2)/4)"\n\n[domain]\nx_min = -1.0\nx_max = 1.0\ny_min = -1.0\ny_max = 1.0\n',
        encoding="utf-8",
    )
    result = runner.invoke(app, ["analyze", "--metric", str(metric), "--out", str(tmp_path)])
    assert result.exit_code == 0
    report = json.loads((tmp_path / "analyze.json").read_text(encoding="utf-8"))
    assert report["result"]["moduli"] == "RP2"


def test_derive(tmp_path):
    result = runner.invoke(app, ["derive", "--out", str(tmp_path)])
    assert result.exit_code == 0
    assert (tmp_path / "derived_system.txt").exists()
    text = (tmp_path / "derived_system.txt").read_text(encoding="utf-8")
    assert "MISMATCH" not in text
    assert "# EQ0 degrees: {10, 8, 7, 6}: ok" in text
