import pytest
from fastapi.testclient import TestClient

from main import app

client = TestClient(app)


@pytest.fixture
def session_id():
    response = client.post("/api/oram/sessions", json={"n": 4096, "rng_seed": 2})
    assert response.status_code == 200
    yield response.json()["session_id"]
    client.delete(f"/api/oram/sessions/{session_id}")


def test_root():
    response = client.get("/")
    assert response.status_code == 200
    assert "version" in response.json()


def test_write_then_read(session_id):
    base = f"/api/oram/sessions/{session_id}"
    assert client.post(f"{base}/write", json={"address": 3, "value": 9}).json()["value"] == 0
    assert client.post(f"{base}/read", json={"address": 3}).json()["value"] == 9
    stats = client.get(f"{base}/stats").json()
    assert stats["n"] == 4096
    assert not stats["halted"]
    assert stats["levels"][0]["ops"] == 2


def test_out_of_range_address(session_id):
    response = client.post(f"/api/oram/sessions/{session_id}/read", json={"address": 4096})
    assert response.status_code == 400


def test_unknown_session():
    assert client.post("/api/oram/sessions/nope/read", json={"address": 1}).status_code == 404
    assert client.get("/api/oram/sessions/nope/stats").status_code == 404
    assert client.delete("/api/oram/sessions/nope").status_code == 404


def test_abort_is_a_conflict():
    session = client.post("/api/oram/sessions", json={"n": 4096, "q_max": 1}).json()["session_id"]
    base = f"/api/oram/sessions/{session}"
    response = client.post(f"{base}/write", json={"address": 0, "value": 1})
    assert response.status_code == 409
    assert response.json()["detail"] == {"error": "AbortQueue", "op_serial": 1}
    assert client.post(f"{base}/read", json={"address": 0}).status_code == 409
    assert client.get(f"{base}/stats").json()["halted"]
    assert client.delete(base).status_code == 200
    assert client.delete(base).status_code == 404


def test_bad_session_config():
    assert client.post("/api/oram/sessions", json={"n": 4096, "ell": 7}).status_code == 400


def test_list_experiments():
    kinds = client.get("/api/experiments/").json()["kinds"]
    assert "spectral" in kinds and "coupling" in kinds


def test_run_experiment():
    response = client.post("/api/experiments/spectral", json={"K": 10})
    assert response.status_code == 200
    body = response.json()
    assert body["passed"]
    assert body["rows"][0]["K"] == 10


def test_experiment_errors():
    assert client.post("/api/experiments/nope", json={}).status_code == 404
    assert client.post("/api/experiments/spectral", json={"K": 0}).status_code == 400


def test_run_workload():
    response = client.post("/api/workloads/run", json={"n": 4096, "ops": 100, "seed": 1})
    assert response.status_code == 200
    body = response.json()
    assert body["exit_code"] == 0
    assert body["mismatches"] == 0
    assert "outputs" not in body


def test_scripted_workload_rejected():
    assert client.post("/api/workloads/run", json={"workload": "scripted-file"}).status_code == 400
