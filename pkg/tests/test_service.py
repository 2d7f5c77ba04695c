"""HTTP service: endpoint contracts, error mapping, payload passthrough."""

import json

import pytest
from fastapi.testclient import TestClient

from buckstokes import __version__
from buckstokes.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok", "version": __version__}


def test_mesh_endpoint(client):
    r = client.post("/mesh", json={"domain": {"kind": "disc"}, "h": 0.25})
    assert r.status_code == 200
    body = r.json()
    assert body["version"] == __version__
    doc = json.loads(body["files"]["mesh.json"])
    assert body["summary"]["vertices"] == len(doc["vertices"])
    assert body["summary"]["triangles"] == len(doc["triangles"])


def test_spectrum_endpoint(client):
    r = client.post("/spectrum", json={"domain": {"kind": "disc"}, "h": 0.25, "k": 2})
    assert r.status_code == 200
    body = r.json()
    assert set(body["files"]) == {
        "spectrum_dirichlet_level0.json",
        "spectrum_buckling_level0.json",
        "spectrum_stokes_level0.json",
        "spectrum_summary.json",
    }
    summary = body["summary"]
    assert abs(summary["weinstein_gap"]) < 0.01
    assert summary["lambda1_buckling"] == pytest.approx(summary["lambda2_dirichlet"], rel=0.01)


def test_rigidity_endpoint(client):
    r = client.post("/rigidity", json={"domain": {"kind": "disc"}, "h": 0.25, "levels": 1})
    assert r.status_code == 200
    body = r.json()
    assert body["summary"]["rows"] == 1
    assert body["summary"]["domains"] == ["disc-1"]
    assert "rigidity.csv" in body["files"]


def test_evolve_endpoint(client):
    r = client.post("/evolve", json={"domain": {"kind": "disc"}, "h": 0.25, "nu": 1.0})
    assert r.status_code == 200
    summary = r.json()["summary"]
    assert summary["rate_relative_error"] <= 0.02
    assert summary["steps"] >= 10


def test_convergence_precondition_is_client_error(client):
    r = client.post("/convergence", json={"domain": {"kind": "disc"}, "h": 0.25, "levels": 2})
    assert r.status_code == 400
    assert "levels" in r.json()["detail"]


def test_bad_domain_params_is_client_error(client):
    r = client.post("/mesh", json={"domain": {"kind": "ellipse", "params": [1.0]}, "h": 0.2})
    assert r.status_code == 400
    r = client.post("/mesh", json={"domain": {"kind": "disc"}, "h": -0.1})
    assert r.status_code == 400


def test_unknown_domain_kind_fails_validation(client):
    r = client.post("/mesh", json={"domain": {"kind": "heptagon"}, "h": 0.2})
    assert r.status_code == 422
