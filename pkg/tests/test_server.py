import pytest
from fastapi.testclient import TestClient

from segcurate.review import ReviewStore
from segcurate.server import create_app

from test_review import ALL_TRUE, make_item


@pytest.fixture
def store():
    s = ReviewStore()
    s.enqueue(make_item("i1"))
    s.enqueue(make_item("i2"))
    return s


@pytest.fixture
def client(store):
    return TestClient(create_app(store))


def decision_body(item_id="i1", reviewer="alice", verdict="accept",
                  rubric=None, notes="", revise=False):
    rubric = rubric if rubric is not None else ALL_TRUE.to_json()
    return {"item_id": item_id, "reviewer_id": reviewer, "rubric": rubric,
            "verdict": verdict, "notes": notes, "revise": revise}


class TestQueueNext:
    def test_lease_flow(self, client):
        resp = client.get("/api/queue/next", params={"reviewer": "alice"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["item"]["item_id"] == "i1"
        assert body["lease_expiry"] > 0

    def test_empty_queue_204(self, client):
        client.get("/api/queue/next", params={"reviewer": "a"})
        client.get("/api/queue/next", params={"reviewer": "b"})
        resp = client.get("/api/queue/next", params={"reviewer": "c"})
        assert resp.status_code == 204


class TestDecision:
    def test_accept_roundtrip(self, client):
        client.get("/api/queue/next", params={"reviewer": "alice"})
        resp = client.post("/api/decision", json=decision_body())
        assert resp.status_code == 200
        assert resp.json()["verdict"] == "accept"

    def test_not_leased_403(self, client):
        client.get("/api/queue/next", params={"reviewer": "alice"})
        resp = client.post("/api/decision", json=decision_body(reviewer="bob"))
        assert resp.status_code == 403

    def test_already_decided_409(self, client):
        client.get("/api/queue/next", params={"reviewer": "alice"})
        client.post("/api/decision", json=decision_body())
        resp = client.post("/api/decision", json=decision_body())
        assert resp.status_code == 409

    def test_rubric_mismatch_422(self, client):
        client.get("/api/queue/next", params={"reviewer": "alice"})
        bad = dict(ALL_TRUE.to_json(), grammar=False)
        resp = client.post("/api/decision", json=decision_body(rubric=bad))
        assert resp.status_code == 422

    def test_unknown_item_404(self, client):
        resp = client.post("/api/decision", json=decision_body(item_id="ghost"))
        assert resp.status_code == 404


class TestItemAndProgress:
    def test_get_item(self, client):
        resp = client.get("/api/item/i1")
        assert resp.status_code == 200
        assert resp.json()["masks"] == [{"h": 2, "w": 2, "runs": [1, 3]}]

    def test_get_missing_item(self, client):
        assert client.get("/api/item/none").status_code == 404

    def test_progress(self, client):
        resp = client.get("/api/progress")
        assert resp.json()["pending"] == 2
        client.get("/api/queue/next", params={"reviewer": "alice"})
        client.post("/api/decision", json=decision_body())
        after = client.get("/api/progress").json()
        assert after["accepted"] == 1
        assert after["acceptance_rate"] == 1.0


class TestAudit:
    def test_audit_enqueues(self, client):
        client.get("/api/queue/next", params={"reviewer": "alice"})
        client.post("/api/decision", json=decision_body())
        resp = client.post("/api/audit", json={"fraction": 1.0, "seed": 3})
        assert resp.status_code == 200
        assert resp.json()["enqueued"] == ["i1#audit"]

    def test_invalid_fraction_422(self, client):
        resp = client.post("/api/audit", json={"fraction": 0.0, "seed": 0})
        assert resp.status_code == 422


class TestStatic:
    def test_ui_bundle_served(self, store, tmp_path):
        ui = tmp_path / "dist"
        ui.mkdir()
        (ui / "index.html").write_text("<html><body>review</body></html>")
        app = create_app(store, ui_dir=str(ui))
        client = TestClient(app)
        resp = client.get("/")
        assert resp.status_code == 200
        assert "review" in resp.text
        # API still reachable under the mount
        assert client.get("/api/progress").status_code == 200

    def test_images_mounted(self, store, tmp_path):
        images = tmp_path / "imgs"
        images.mkdir()
        (images / "a.png").write_bytes(b"\x89PNG fake")
        client = TestClient(create_app(store, images_dir=str(images)))
        assert client.get("/images/a.png").status_code == 200
