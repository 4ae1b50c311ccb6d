import numpy as np
import pytest
from fastapi.testclient import TestClient

from evars.service import create_app
from evars.simulate import ScenarioSpec, generate_scenario


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def dataset_payload():
    spec = ScenarioSpec(n_seas=12, amplitude=1.0, length=120,
                        offline_fraction=0.75, t_start=5, t_end=25,
                        delta_base=1.0, delta_max=2.0, kappa=0.5,
                        noise_y=0.02, noise_x=0.02, n_covariates=2, seed=0)
    offline, online = generate_scenario(spec)
    payload = {
        "covariates": offline.covariates.tolist(),
        "target": offline.target.tolist(),
        "season_length": 12,
        "covariate_names": list(offline.covariate_names),
    }
    return payload, online


class TestHealth:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"


class TestStreams:
    def test_lifecycle(self, client):
        payload, online = dataset_payload()
        created = client.post("/streams", json={
            "offline": payload, "tuning_budget": 4, "seed": 0})
        assert created.status_code == 200, created.text
        stream_id = created.json()["stream_id"]
        assert created.json()["chosen_model"]

        step = client.post(f"/streams/{stream_id}/step", json={
            "covariates": online.covariates[0].tolist(),
            "target": float(online.target[0])})
        assert step.status_code == 200, step.text
        body = step.json()
        assert np.isfinite(body["mean"]) and body["variance"] >= 0
        assert body["refit_count"] == 0 or body["new_events"]

        events = client.get(f"/streams/{stream_id}/events")
        assert events.status_code == 200
        assert events.json()["stream_id"] == stream_id

        deleted = client.delete(f"/streams/{stream_id}")
        assert deleted.status_code == 200
        assert client.get(f"/streams/{stream_id}/events").status_code == 404

    def test_prediction_precedes_observation(self, client):
        payload, online = dataset_payload()
        ids = []
        for _ in range(2):
            created = client.post("/streams", json={
                "offline": payload, "tuning_budget": 4, "seed": 0})
            ids.append(created.json()["stream_id"])
        x0 = online.covariates[0].tolist()
        a = client.post(f"/streams/{ids[0]}/step",
                        json={"covariates": x0,
                              "target": float(online.target[0])}).json()
        b = client.post(f"/streams/{ids[1]}/step",
                        json={"covariates": x0,
                              "target": float(online.target[0]) + 50.0}).json()
        assert a["mean"] == b["mean"] and a["variance"] == b["variance"]
        for stream_id in ids:
            client.delete(f"/streams/{stream_id}")

    def test_unknown_stream_404(self, client):
        assert client.post("/streams/nope/step", json={
            "covariates": [0.0], "target": 1.0}).status_code == 404
        assert client.delete("/streams/nope").status_code == 404

    def test_invalid_offline_422(self, client):
        # offline shorter than two seasons is rejected
        response = client.post("/streams", json={
            "offline": {"covariates": [[0.0]] * 10, "target": [1.0] * 10,
                        "season_length": 12},
            "tuning_budget": 2})
        assert response.status_code == 422

    def test_non_finite_step_422(self, client):
        payload, online = dataset_payload()
        created = client.post("/streams", json={
            "offline": payload, "tuning_budget": 4, "seed": 0})
        stream_id = created.json()["stream_id"]
        response = client.post(f"/streams/{stream_id}/step", json={
            "covariates": online.covariates[0].tolist(), "target": None})
        assert response.status_code == 422
        client.delete(f"/streams/{stream_id}")


class TestSimulate:
    def test_simulate_endpoint(self, client):
        response = client.post("/simulate", json={
            "n_seas": 12, "length": 120, "offline_fraction": 0.75,
            "t_start": 5, "t_end": 25, "delta_max": 2.0, "kappa": 0.5,
            "n_covariates": 2, "seed": 0})
        assert response.status_code == 200
        body = response.json()
        assert len(body["offline"]["target"]) == 90
        assert len(body["online"]["target"]) == 30

    def test_invalid_scenario_422(self, client):
        response = client.post("/simulate", json={
            "n_seas": 12, "length": 120, "t_start": 30, "t_end": 5})
        assert response.status_code == 422


class TestScalingFactor:
    def test_matches_engine(self, client):
        from evars.engine import output_scaling_factor
        history = list(np.tile(np.arange(1.0, 7.0), 5))
        response = client.post("/scaling-factor", json={
            "history": history, "t": 29, "window": 2, "seasons": 2,
            "season_length": 6})
        assert response.status_code == 200
        expected = output_scaling_factor(history, 29, 2, 2, 6)
        assert response.json()["eta"] == pytest.approx(expected)

    def test_insufficient_history_422(self, client):
        response = client.post("/scaling-factor", json={
            "history": [1.0] * 5, "t": 4, "window": 2, "seasons": 2,
            "season_length": 6})
        assert response.status_code == 422
