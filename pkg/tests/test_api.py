import asyncio
import json

import pytest

SIMULATE = {"model": "ba", "params": {"n_final": 20}, "seed": 1}


async def _wait(auth_client, job_id):
    for _ in range(100):
        resp = await auth_client.get(f"/api/v1/jobs/{job_id}")
        assert resp.status_code == 200
        data = resp.json()
        if data["status"] in ("completed", "failed"):
            return data
        await asyncio.sleep(0.05)
    raise AssertionError(f"job {job_id} did not finish")


@pytest.mark.asyncio
async def test_models_are_public(client):
    resp = await client.get("/api/v1/models")
    assert resp.status_code == 200
    names = {m["name"] for m in resp.json()}
    assert {"ba", "async_ca", "forest_fire"} <= names


@pytest.mark.asyncio
async def test_model_detail(client):
    resp = await client.get("/api/v1/models/ba")
    assert resp.status_code == 200
    assert resp.json()["params"]["n_final"] == 100
    resp = await client.get("/api/v1/models/small_world")
    assert resp.status_code == 404


@pytest.mark.asyncio
async def test_submit_requires_key(client):
    resp = await client.post("/api/v1/experiments/simulate", json=SIMULATE)
    assert resp.status_code == 422

    resp = await client.post(
        "/api/v1/experiments/simulate",
        json=SIMULATE,
        headers={"X-Service-Key": "wrong"},
    )
    assert resp.status_code == 403


@pytest.mark.asyncio
async def test_unconfigured_key_is_unavailable(client, monkeypatch):
    from app.core.config import get_settings

    monkeypatch.setenv("SERVICE_API_KEY", "")
    get_settings.cache_clear()
    resp = await client.get("/api/v1/jobs/x", headers={"X-Service-Key": "test-key"})
    assert resp.status_code == 503


@pytest.mark.asyncio
async def test_simulate_job_lifecycle(auth_client):
    resp = await auth_client.post("/api/v1/experiments/simulate", json=SIMULATE)
    assert resp.status_code == 202
    job = resp.json()
    assert job["kind"] == "simulate"
    assert job["status"] in ("pending", "processing", "completed")

    data = await _wait(auth_client, job["job_id"])
    assert data["status"] == "completed"
    assert data["completed_at"]
    assert set(data["artifacts"]) == {"trajectory.gna", "final.gna", "manifest.json"}

    resp = await auth_client.get(f"/api/v1/jobs/{job['job_id']}/artifacts/manifest.json")
    assert resp.status_code == 200
    manifest = json.loads(resp.content)
    assert manifest["seed"] == 1
    assert manifest["summary"]["nodes"] == 20

    health = (await auth_client.get("/health")).json()
    assert health["jobs"] == 1


@pytest.mark.asyncio
async def test_artifact_outside_job_is_not_served(auth_client):
    resp = await auth_client.post("/api/v1/experiments/simulate", json=SIMULATE)
    job_id = resp.json()["job_id"]
    await _wait(auth_client, job_id)
    resp = await auth_client.get(f"/api/v1/jobs/{job_id}/artifacts/../../etc/passwd")
    assert resp.status_code == 404
    resp = await auth_client.get(f"/api/v1/jobs/{job_id}/artifacts/missing.csv")
    assert resp.status_code == 404


@pytest.mark.asyncio
async def test_out_in_body_is_ignored(auth_client, tmp_path):
    body = dict(SIMULATE, out=str(tmp_path / "elsewhere"))
    resp = await auth_client.post("/api/v1/experiments/simulate", json=body)
    assert resp.status_code == 202
    await _wait(auth_client, resp.json()["job_id"])
    assert not (tmp_path / "elsewhere").exists()


@pytest.mark.asyncio
async def test_seeded_kind_without_seed_is_rejected(auth_client):
    resp = await auth_client.post("/api/v1/experiments/merger", json={})
    assert resp.status_code == 400
    assert "seed" in resp.json()["detail"]


@pytest.mark.asyncio
async def test_invalid_body_is_rejected(auth_client):
    resp = await auth_client.post("/api/v1/experiments/simulate", json={"seed": 1, "bogus": True})
    assert resp.status_code == 400


@pytest.mark.asyncio
async def test_unknown_kind_is_404(auth_client):
    resp = await auth_client.post("/api/v1/experiments/teleport", json={"seed": 1})
    assert resp.status_code == 404


@pytest.mark.asyncio
async def test_failed_job_reports_error(auth_client):
    resp = await auth_client.post("/api/v1/experiments/discover", json={"trace": "/nonexistent/trace.gna"})
    assert resp.status_code == 202
    data = await _wait(auth_client, resp.json()["job_id"])
    assert data["status"] == "failed"
    assert "trace" in data["error"]
    assert data["artifacts"] == []


@pytest.mark.asyncio
async def test_unknown_job_is_404(auth_client):
    resp = await auth_client.get("/api/v1/jobs/does-not-exist")
    assert resp.status_code == 404


@pytest.mark.asyncio
async def test_opnet_job(auth_client, repo_data):
    body = {"scenario": str(repo_data / "sar_demo.yaml"), "seed": 2, "format": "csv"}
    resp = await auth_client.post("/api/v1/experiments/opnet", json=body)
    data = await _wait(auth_client, resp.json()["job_id"])
    assert data["status"] == "completed"
    assert "series.gna" not in data["artifacts"]
    resp = await auth_client.get(f"/api/v1/jobs/{data['job_id']}/artifacts/influence.csv")
    assert resp.status_code == 200
    assert resp.text.startswith(
        "node,agent_class,size,fraction,degree_centrality,removal_components,removal_largest_fraction\n"
    )
