import os
import tempfile

import numpy as np
import pytest
from fastapi.testclient import TestClient

from odeal.data import generate_synthetic_dataset, write_observations_csv
from odeal.service import create_app

SESSION_CONFIG = {
    "classifier": {"kind": "gbdt", "gbdt": {"n_trees": 10, "max_depth": 2,
                                            "min_samples_leaf": 2}},
    "n_initial": 10,
    "budget": 18,
    "init_method": "lof",
    "k_per_cycle": 1,
    "confidence_tau": 0.0,
    "strategy": "uncertainty",
    "seed": 3,
}


def dataset_csv_text(n=300, error_rate=0.05, seed=5) -> str:
    ds = generate_synthetic_dataset(n=n, error_rate=error_rate, seed=seed)
    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
        path = fh.name
    write_observations_csv(ds, path)
    with open(path) as fh:
        text = fh.read()
    os.unlink(path)
    return text


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path / "data")
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def dataset_id(client):
    resp = client.post("/datasets", content=dataset_csv_text())
    assert resp.status_code == 201
    return resp.json()["dataset_id"]


def create_session(client, dataset_id, mode="trusted", **config_overrides):
    config = {**SESSION_CONFIG, **config_overrides}
    resp = client.post("/sessions", json={
        "dataset_id": dataset_id,
        "initial_labeling": mode,
        "config": config,
    })
    return resp


class TestDatasets:
    def test_upload(self, client):
        resp = client.post("/datasets", content=dataset_csv_text())
        assert resp.status_code == 201
        body = resp.json()
        assert body["rows"] == 300
        assert 0 < body["error_rate"] < 1

    def test_upload_idempotent(self, client):
        text = dataset_csv_text()
        a = client.post("/datasets", content=text).json()["dataset_id"]
        b = client.post("/datasets", content=text).json()["dataset_id"]
        assert a == b

    def test_bad_csv_rejected(self, client):
        resp = client.post("/datasets", content="definitely,not,the,schema\n1,2,3,4\n")
        assert resp.status_code == 422
        body = resp.json()
        assert set(body) == {"code", "message", "details"}

    def test_empty_upload(self, client):
        assert client.post("/datasets", content="").status_code == 422


class TestSessionCreation:
    def test_external_mode_pends_initial_batch(self, client, dataset_id):
        resp = create_session(client, dataset_id, mode="external")
        assert resp.status_code == 201
        body = resp.json()
        assert body["phase"] == "awaiting_labels"
        assert body["pending"]["kind"] == "initial"
        assert body["pending"]["size"] == SESSION_CONFIG["n_initial"]

    def test_trusted_mode_pends_first_query(self, client, dataset_id):
        resp = create_session(client, dataset_id, mode="trusted")
        assert resp.status_code == 201
        body = resp.json()
        assert body["pending"]["kind"] == "query"
        assert body["pending"]["size"] == 1

    def test_unknown_dataset_404(self, client):
        resp = create_session(client, "nope")
        assert resp.status_code == 404

    def test_budget_not_above_initial_422(self, client, dataset_id):
        resp = create_session(client, dataset_id, budget=10)
        assert resp.status_code == 422

    def test_bad_mode_422(self, client, dataset_id):
        resp = create_session(client, dataset_id, mode="telepathy")
        assert resp.status_code == 422


class TestPendingAndLabels:
    def test_fetch_is_idempotent(self, client, dataset_id):
        sid = create_session(client, dataset_id).json()["session_id"]
        a = client.get(f"/sessions/{sid}/pending")
        b = client.get(f"/sessions/{sid}/pending")
        assert a.status_code == b.status_code == 200
        assert a.json()["pending"] == b.json()["pending"]

    def test_instances_carry_payload(self, client, dataset_id):
        sid = create_session(client, dataset_id).json()["session_id"]
        pending = client.get(f"/sessions/{sid}/pending").json()["pending"]
        inst = pending["instances"][0]
        assert set(inst["features"]) == {
            "datetime", "latitude", "longitude", "pressure", "temperature",
            "salinity",
        }
        assert inst["units"]["pressure"] == "dbar"
        assert inst["model_p1"] is not None  # trusted mode: model already fit
        assert any(row["is_queried"] for row in inst["context"])

    def test_submit_advances_cycle(self, client, dataset_id):
        created = create_session(client, dataset_id).json()
        sid = created["session_id"]
        pending = created["pending"]
        labels = {str(i["index"]): 0 for i in pending["instances"]}
        resp = client.post(f"/sessions/{sid}/labels", json={"labels": labels})
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"]["n_queried"] == 1
        assert body["revision"] == created["revision"] + 1

    def test_partial_submission_lists_missing(self, client, dataset_id):
        created = create_session(client, dataset_id, mode="external").json()
        sid = created["session_id"]
        want = [i["index"] for i in created["pending"]["instances"]]
        resp = client.post(f"/sessions/{sid}/labels",
                           json={"labels": {str(want[0]): 0}})
        assert resp.status_code == 422
        missing = resp.json()["details"]["missing"]
        assert set(missing) == set(want[1:])

    def test_bad_label_value(self, client, dataset_id):
        created = create_session(client, dataset_id, mode="external").json()
        sid = created["session_id"]
        labels = {str(i["index"]): 3 for i in created["pending"]["instances"]}
        resp = client.post(f"/sessions/{sid}/labels", json={"labels": labels})
        assert resp.status_code == 422

    def test_stale_revision_conflicts(self, client, dataset_id):
        created = create_session(client, dataset_id).json()
        sid = created["session_id"]
        revision = created["revision"]
        labels = {str(i["index"]): 0 for i in created["pending"]["instances"]}
        ok = client.post(f"/sessions/{sid}/labels",
                         json={"labels": labels, "revision": revision})
        assert ok.status_code == 200
        next_pending = ok.json()["pending"]
        stale_labels = {str(i["index"]): 0 for i in next_pending["instances"]}
        stale = client.post(f"/sessions/{sid}/labels",
                            json={"labels": stale_labels, "revision": revision})
        assert stale.status_code == 409
        assert stale.json()["code"] == "stale_revision"


class TestFullSessionFlow:
    def test_budget_exhaustion_reaches_done(self, client, dataset_id):
        created = create_session(client, dataset_id).json()
        sid = created["session_id"]
        pending = created["pending"]
        while pending is not None:
            labels = {str(i["index"]): 0 for i in pending["instances"]}
            resp = client.post(f"/sessions/{sid}/labels", json={"labels": labels})
            assert resp.status_code == 200
            body = resp.json()
            pending = body["pending"]
        assert body["phase"] == "done"
        status = client.get(f"/sessions/{sid}/status").json()
        assert status["stop_reason"] in ("budget_exhausted", "confident")
        assert status["labels_spent"] <= SESSION_CONFIG["budget"]
        assert "predictions_url" in status

    def test_predictions_csv(self, client, dataset_id):
        created = create_session(client, dataset_id).json()
        sid = created["session_id"]
        early = client.get(f"/sessions/{sid}/predictions")
        assert early.status_code == 409
        pending = created["pending"]
        while pending is not None:
            labels = {str(i["index"]): 0 for i in pending["instances"]}
            pending = client.post(
                f"/sessions/{sid}/labels", json={"labels": labels}
            ).json()["pending"]
        resp = client.get(f"/sessions/{sid}/predictions")
        assert resp.status_code == 200
        lines = resp.text.strip().splitlines()
        assert lines[0] == "index,predicted_label,source"
        sources = {line.split(",")[2] for line in lines[1:]}
        assert sources <= {"oracle", "model"}
        assert len(lines) - 1 == 180  # 60% train split of 300 rows

    def test_pending_409_after_done(self, client, dataset_id):
        created = create_session(client, dataset_id).json()
        sid = created["session_id"]
        pending = created["pending"]
        while pending is not None:
            labels = {str(i["index"]): 0 for i in pending["instances"]}
            pending = client.post(
                f"/sessions/{sid}/labels", json={"labels": labels}
            ).json()["pending"]
        resp = client.get(f"/sessions/{sid}/pending")
        assert resp.status_code == 409
        assert "predictions_url" in resp.json()["details"]


class TestCrashRecovery:
    def test_restart_resumes_sessions(self, tmp_path):
        data_dir = tmp_path / "data"
        app = create_app(data_dir)
        with TestClient(app) as client:
            dataset_id = client.post(
                "/datasets", content=dataset_csv_text()
            ).json()["dataset_id"]
            created = create_session(client, dataset_id).json()
            sid = created["session_id"]
            pending = created["pending"]
            for _ in range(3):
                labels = {str(i["index"]): 0 for i in pending["instances"]}
                pending = client.post(
                    f"/sessions/{sid}/labels", json={"labels": labels}
                ).json()["pending"]
            before = client.get(f"/sessions/{sid}/status").json()

        fresh = create_app(data_dir)
        with TestClient(fresh) as client:
            after = client.get(f"/sessions/{sid}/status").json()
            assert after == before
            # and the session still advances
            pend = client.get(f"/sessions/{sid}/pending").json()["pending"]
            labels = {str(i["index"]): 0 for i in pend["instances"]}
            resp = client.post(f"/sessions/{sid}/labels", json={"labels": labels})
            assert resp.status_code == 200


class TestRandomInterleavings:
    def test_invariants_hold_under_fuzzed_requests(self, client, dataset_id):
        rng = np.random.default_rng(17)
        created = create_session(client, dataset_id, mode="external").json()
        sid = created["session_id"]
        for _ in range(120):
            op = rng.integers(0, 4)
            if op == 0:
                resp = client.get(f"/sessions/{sid}/pending")
                assert resp.status_code in (200, 409)
            elif op == 1:
                resp = client.get(f"/sessions/{sid}/status")
                assert resp.status_code == 200
                status = resp.json()
                assert status["labels_spent"] <= status["budget"]
            elif op == 2:  # garbage submissions must never corrupt state
                resp = client.post(f"/sessions/{sid}/labels", json={
                    "labels": {str(int(rng.integers(0, 500))): int(rng.integers(0, 2))}
                })
                assert resp.status_code in (409, 422)
            else:  # valid submission when a batch is pending
                pend = client.get(f"/sessions/{sid}/pending")
                if pend.status_code != 200 or pend.json()["pending"] is None:
                    continue
                labels = {
                    str(i["index"]): int(rng.integers(0, 2))
                    for i in pend.json()["pending"]["instances"]
                }
                resp = client.post(f"/sessions/{sid}/labels", json={"labels": labels})
                assert resp.status_code in (200, 409)
        status = client.get(f"/sessions/{sid}/status").json()
        assert status["labels_spent"] <= status["budget"]
