import pytest
from fastapi.testclient import TestClient

from geodrat.main import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def test_index(client):
    assert client.get("/").json()["tool"] == "geodrat"


def test_examples(client):
    entries = client.get("/api/examples").json()
    assert "bessel" in [e["name"] for e in entries]
    assert client.get("/api/examples/sphere").json()["expected_moduli"] == "RP2"
    assert client.get("/api/examples/nope").status_code == 404


def test_analyze(client):
    response = client.post("/api/analyze", json={"example": "flat"})
    assert response.status_code == 200
    assert response.json()["result"]["verdict"] == "constant_curvature"


def test_analyze_rejects_two_sources(client):
    response = client.post("/api/analyze", json={"example": "flat", "conformal_factor": "1"})
    assert response.status_code == 422


def test_analyze_inline_needs_domain(client):
    response = client.post("/api/analyze", json={"conformal_factor": "1 + x^2"})
    assert response.status_code == 400


def test_analyze_bad_expression(client):
    body = {"conformal_factor": "1 + * x", "domain": {"x_min": 0, "x_max": 1, "y_min": 0, "y_max": 1}}
    assert client.post("/api/analyze", json=body).status_code == 422


def test_verify(client):
    body = {
        "example": "flat",
        "integral": {"u": "1", "v": "0", "w": "0", "r": "1"},
        "trajectories": 3,
        "t_end": 1.0,
    }
    response = client.post("/api/verify", json=body)
    assert response.status_code == 200
    assert response.json()["result"]["max_drift"] <= 1e-10


def test_derive(client):
    body = client.get("/api/derive").json()
    assert body["result"]["consistent"]
    assert client.get("/api/derive/dump").text.startswith("# geodrat derived system")
