import base64
import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", message="Using `httpx`")

from fastapi.testclient import TestClient

from hyperscope.config import EngineConfig
from hyperscope.engine import bundle_from_synthetic
from hyperscope.predictor import FineTuneConfig, TrainConfig
from hyperscope.service import ServiceState, create_app


@pytest.fixture(scope="module")
def service():
    cfg = EngineConfig(
        train=TrainConfig(epochs=80, seed=0),
        fine_tune=FineTuneConfig(steps=15),
        roll_steps=10,
    )
    bundle = bundle_from_synthetic(
        {"n": 30, "m": 12, "n_steps": 4, "n_communities": 3, "noise": 0.08, "seed": 5}
    )
    return ServiceState(bundle, cfg, seed=42)


@pytest.fixture
def client(service):
    return TestClient(create_app(service))


@pytest.fixture
def session(client):
    return client.get("/session").json()


def wait_for_job(client, job_id, timeout_ms=20000):
    return client.get(f"/feedback/job/{job_id}", params={"wait_ms": timeout_ms}).json()


class TestSessionAndViewport:
    def test_session_descriptor(self, session):
        assert session["n"] == 30 and session["m"] == 12
        assert session["timesteps"] == ["2015", "2016", "2017", "2018"]
        assert session["level_budgets"]["level1_cells"] == 262144
        assert session["level_budgets"]["documents_page_default"] == 4
        assert len(session["axis"]["rows"]) == 30

    def test_unknown_session_404(self, client):
        assert client.get("/viewport", params={
            "session": "ghost", "level": 1, "row0": 0, "row1": 1, "col0": 0, "col1": 1,
        }).status_code == 404

    def test_level1_bitset_round_trip(self, client, session):
        sid = session["session_id"]
        r = client.get("/viewport", params={
            "session": sid, "level": 1, "row0": 0, "row1": 8, "col0": 0, "col1": 8,
        })
        assert r.status_code == 200
        payload = r.json()
        assert payload["encoding"] == "packbits-base64"
        bits = np.unpackbits(np.frombuffer(base64.b64decode(payload["bits"]), np.uint8))
        assert bits[: payload["n_cells"]].size == 64

    def test_level_budget_enforced_with_413(self, client, session):
        sid = session["session_id"]
        r = client.get("/viewport", params={
            "session": sid, "level": 1, "row0": 0, "row1": 30, "col0": 0, "col1": 12,
        })
        assert r.status_code == 200  # 360 cells fits
        # shrink the budget through a dedicated tiny service
        cfg = EngineConfig(
            train=TrainConfig(epochs=10, seed=0), level1_cell_budget=16,
            fine_tune=FineTuneConfig(steps=2), roll_steps=2,
        )
        bundle = bundle_from_synthetic(
            {"n": 10, "m": 6, "n_steps": 3, "n_communities": 2, "noise": 0.05, "seed": 1}
        )
        small = TestClient(create_app(ServiceState(bundle, cfg, seed=1)))
        sid2 = small.get("/session").json()["session_id"]
        r = small.get("/viewport", params={
            "session": sid2, "level": 1, "row0": 0, "row1": 10, "col0": 0, "col1": 6,
        })
        assert r.status_code == 413

    def test_level6_page_budget(self, client, session):
        sid = session["session_id"]
        r = client.get("/cell/0/0/documents", params={"session": sid, "page_size": 9})
        assert r.status_code == 400
        r = client.get("/cell/0/0/documents", params={"session": sid})
        assert r.status_code == 200
        assert r.json()["page_size"] == 4

    def test_cell_timeline(self, client, session):
        sid = session["session_id"]
        r = client.get("/cell/2/3/timeline", params={"session": sid})
        body = r.json()
        assert len(body["history"]) == 4
        assert len(body["predicted"]) == 2
        assert body["confidence"][0] > body["confidence"][1]


class TestViewChanges:
    def test_exactly_one_change_per_request(self, client, session):
        sid = session["session_id"]
        r = client.post("/view", json={"session": sid, "threshold": 0.5,
                                       "marking": {"row": 0, "col": 0, "starred": True}})
        assert r.status_code == 400
        r = client.post("/view", json={"session": sid})
        assert r.status_code == 400

    def test_threshold_filters_level2(self, client, session):
        sid = session["session_id"]
        client.post("/view", json={"session": sid, "threshold": 0.9})
        payload = client.get("/viewport", params={
            "session": sid, "level": 2, "row0": 0, "row1": 30, "col0": 0, "col1": 12,
        }).json()
        assert all(v >= 0.9 for v in payload["cells"]["value"])
        client.post("/view", json={"session": sid, "threshold": 0.1})

    def test_ordering_request_returns_permutation(self, client, session):
        sid = session["session_id"]
        r = client.post("/view", json={"session": sid, "ordering": {
            "axis": "rows", "strategy": "dendrogram",
            "metric": "jaccard", "linkage": "average",
        }})
        body = r.json()
        assert sorted(body["permutation"]) == list(range(30))
        assert body["ordering_id"].startswith("rows-")

    def test_hierarchy_edit_and_collapse(self, client, session):
        sid = session["session_id"]
        r = client.post("/view", json={"session": sid, "hierarchy_edit": {
            "axis": "rows", "edit": {"op": "create_group", "name": "cellA", "members": [0, 1]},
        }})
        assert r.status_code == 200
        r = client.post("/view", json={"session": sid, "collapse": {
            "axis": "rows", "group": "cellA", "collapsed": True,
        }})
        assert len(r.json()["axis"]["rows"]) == 29
        r = client.post("/view", json={"session": sid, "collapse": {
            "axis": "rows", "group": "cellA", "collapsed": False,
        }})
        assert len(r.json()["axis"]["rows"]) == 30

    def test_marking_persisted_and_echoed(self, client, session):
        sid = session["session_id"]
        client.post("/view", json={"session": sid, "marking": {"row": 1, "col": 2, "starred": True}})
        payload = client.get("/viewport", params={
            "session": sid, "level": 2, "row0": 0, "row1": 5, "col0": 0, "col1": 5,
        }).json()
        assert "1,2" in payload.get("markings", [])

    def test_bad_edit_surfaces_as_400(self, client, session):
        sid = session["session_id"]
        r = client.post("/view", json={"session": sid, "hierarchy_edit": {
            "axis": "rows", "edit": {"op": "create_group", "name": "", "members": []},
        }})
        assert r.status_code == 400


class TestFeedbackLifecycle:
    def test_submit_poll_preview_resolve(self, client):
        sid = client.get("/session").json()["session_id"]
        job = client.post("/feedback", json={
            "session": sid, "assertions": [[3, 4, 1.0, 3]],
        }).json()
        assert job["state"] == "running" or job["state"] == "preview-ready"
        done = wait_for_job(client, job["job_id"])
        assert done["state"] == "preview-ready"
        assert "change" in done
        resolved = client.post("/feedback/resolve", json={"session": sid, "decision": "accept"})
        assert resolved.status_code == 200
        assert resolved.json()["snapshot_id"]

    def test_double_submit_conflicts(self, client):
        sid = client.get("/session").json()["session_id"]
        job = client.post("/feedback", json={"session": sid, "assertions": [[1, 1, 0.8, 3]]}).json()
        second = client.post("/feedback", json={"session": sid, "assertions": [[2, 2, 0.8, 3]]})
        assert second.status_code == 409
        wait_for_job(client, job["job_id"])
        client.post("/feedback/resolve", json={"session": sid, "decision": "reject"})

    def test_resolve_without_preview_conflicts(self, client):
        sid = client.get("/session").json()["session_id"]
        r = client.post("/feedback/resolve", json={"session": sid, "decision": "accept"})
        assert r.status_code == 409

    def test_read_isolation_during_job(self, client):
        sid = client.get("/session").json()["session_id"]
        params = {"session": sid, "level": 2, "row0": 0, "row1": 30, "col0": 0, "col1": 12}
        before = client.get("/viewport", params=params).content
        job = client.post("/feedback", json={"session": sid, "assertions": [[5, 5, 1.0, 3]]}).json()
        # responses during the running job are bit-identical to the committed snapshot
        during = client.get("/viewport", params=params).content
        assert during == before
        done = wait_for_job(client, job["job_id"])
        assert done["state"] == "preview-ready"
        still = client.get("/viewport", params=params).content
        assert still == before  # previewing does not change committed reads
        client.post("/feedback/resolve", json={"session": sid, "decision": "reject"})
        after = client.get("/viewport", params=params).content
        assert after == before  # reject left everything untouched

    def test_reject_restores_bitwise(self, client):
        sid = client.get("/session").json()["session_id"]
        snap = client.get("/session", params={"session": sid}).json()["snapshot_id"]
        job = client.post("/feedback", json={"session": sid, "assertions": [[7, 2, 0.0, 3]]}).json()
        wait_for_job(client, job["job_id"])
        client.post("/feedback/resolve", json={"session": sid, "decision": "reject"})
        assert client.get("/session", params={"session": sid}).json()["snapshot_id"] == snap


class TestProvenanceEndpoints:
    def test_state_changes_each_record_one_event(self, client):
        sid = client.get("/session").json()["session_id"]
        n0 = len(client.get("/provenance", params={"session": sid}).json()["events"])
        client.post("/view", json={"session": sid, "threshold": 0.35})
        client.post("/view", json={"session": sid, "ordering": {"axis": "cols", "strategy": "size"}})
        client.post("/view", json={"session": sid, "marking": {"row": 0, "col": 1, "starred": True}})
        client.post("/view", json={"session": sid, "annotation": {"target": {"row": 0}, "text": "note"}})
        job = client.post("/feedback", json={"session": sid, "assertions": [[2, 3, 1.0, 3]]}).json()
        wait_for_job(client, job["job_id"])
        client.post("/feedback/resolve", json={"session": sid, "decision": "accept"})
        events = client.get("/provenance", params={"session": sid}).json()["events"]
        state_changing = [e for e in events[n0:] if e["kind"] != "search"]
        assert [e["kind"] for e in state_changing] == [
            "filter-change", "reorder", "marking", "annotation",
            "feedback-preview", "feedback-accept",
        ]

    def test_undo_endpoint_restores_prior_snapshot(self, client):
        sid = client.get("/session").json()["session_id"]
        before = client.get("/session", params={"session": sid}).json()["snapshot_id"]
        job = client.post("/feedback", json={"session": sid, "assertions": [[4, 4, 1.0, 3]]}).json()
        wait_for_job(client, job["job_id"])
        client.post("/feedback/resolve", json={"session": sid, "decision": "accept"})
        changed = client.get("/session", params={"session": sid}).json()["snapshot_id"]
        assert changed != before
        client.post("/provenance/undo", json={"session": sid})  # undo accept -> previewing
        r = client.post("/provenance/undo", json={"session": sid})  # undo preview
        assert r.status_code == 200
        restored = client.get("/session", params={"session": sid}).json()["snapshot_id"]
        assert restored == before

    def test_snapshot_endpoint_serves_model_container(self, client):
        sid = client.get("/session").json()["session_id"]
        snap_id = client.get("/session", params={"session": sid}).json()["snapshot_id"]
        body = client.get(f"/snapshot/{snap_id}", params={"session": sid}).json()
        assert body["format"] == "hyperscope-model"
        assert body["version"] == 1
        assert len(body["X"]) == 30 and len(body["Y"]) == 12
        missing = client.get("/snapshot/nope", params={"session": sid})
        assert missing.status_code == 404


class TestSearch:
    def test_search_matches_labels(self, client):
        sid = client.get("/session").json()["session_id"]
        res = client.get("/search", params={"session": sid, "q": "topic-1"}).json()
        labels = [e["label"] for e in res["edges"]]
        assert "topic-1" in labels and "topic-10" in labels

    def test_search_no_matches_is_empty_200(self, client):
        sid = client.get("/session").json()["session_id"]
        res = client.get("/search", params={"session": sid, "q": "qqqq"})
        assert res.status_code == 200
        assert res.json()["nodes"] == []
