"""HTTP service contract: routes, status codes, payload shapes."""

import base64
import io
import json

import numpy as np
import pytest
from PIL import Image
from fastapi.testclient import TestClient

from noisebias.errors import InputError
from noisebias.features import FeatureSpace
from noisebias.server import create_app, run_server
from noisebias.session import (CatchSource, LabelingSession,
                               QualificationRule)


def decode_png(encoded: str) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(base64.b64decode(encoded))))

SPACE = FeatureSpace.raw_pixel("srv-4x4", 4, 4)


def config_dict(session_id="web1", *, catch_rate=0.0, n_target_trials=16,
                seed=11):
    pool = []
    if catch_rate > 0:
        pool = [CatchSource(true_class="A", seed=31).to_dict(),
                CatchSource(true_class="B", seed=32).to_dict()]
    qual = (QualificationRule(2, 0.8) if catch_rate > 0
            else QualificationRule(0, 0.8))
    return {
        "session_id": session_id,
        "space": SPACE.to_dict(),
        "category_name": "dax",
        "n_target_trials": n_target_trials,
        "scales": [1, 2, 4],
        "catch_rate": catch_rate,
        "catch_pool": pool,
        "qualification": qual.to_dict(),
        "seed": seed,
    }


@pytest.fixture
def client(tmp_path):
    app = create_app(str(tmp_path / "data"))
    with TestClient(app) as c:
        yield c
    app.state.registry.close_all()


def label_until_done(client, session_id, worker, respond=lambda i: "yes"):
    k = 0
    while True:
        r = client.get(f"/api/sessions/{session_id}/next",
                       params={"worker": worker})
        assert r.status_code == 200
        body = r.json()
        if body.get("status") == "complete":
            return k
        client.post(f"/api/sessions/{session_id}/labels",
                    json={"worker": worker,
                          "stimulus_id": body["stimulus_id"],
                          "response": respond(k)})
        k += 1


class TestCreate:
    def test_create_returns_201_with_id(self, client):
        r = client.post("/api/sessions", json=config_dict())
        assert r.status_code == 201
        assert r.json() == {"session_id": "web1"}

    def test_duplicate_create_is_409(self, client):
        client.post("/api/sessions", json=config_dict())
        r = client.post("/api/sessions", json=config_dict())
        assert r.status_code == 409
        assert "error" in r.json()

    def test_invalid_config_is_400(self, client):
        bad = config_dict()
        del bad["space"]
        r = client.post("/api/sessions", json=bad)
        assert r.status_code == 400
        assert "missing" in r.json()["error"]

    def test_config_roundtrips(self, client):
        sent = config_dict(catch_rate=0.25)
        client.post("/api/sessions", json=sent)
        got = client.get("/api/sessions/web1/config")
        assert got.status_code == 200
        assert got.json() == sent

    def test_sessions_index(self, client):
        assert client.get("/api/sessions").json() == {"sessions": []}
        client.post("/api/sessions", json=config_dict(session_id="b"))
        client.post("/api/sessions", json=config_dict(session_id="a"))
        assert client.get("/api/sessions").json() == {"sessions": ["a", "b"]}


class TestNext:
    def test_unknown_session_is_404(self, client):
        r = client.get("/api/sessions/nope/next", params={"worker": "w"})
        assert r.status_code == 404

    def test_payload_shape_and_image_decoding(self, client):
        client.post("/api/sessions", json=config_dict())
        r = client.get("/api/sessions/web1/next", params={"worker": "w"})
        body = r.json()
        assert sorted(body) == ["category", "images", "index",
                                "stimulus_id", "total"]
        assert body["stimulus_id"] == "000000:w"
        assert body["index"] == 0
        assert body["total"] == 16
        assert body["category"] == "dax"
        sizes = [decode_png(encoded).shape for encoded in body["images"]]
        assert sizes == [(4, 4), (8, 8), (16, 16)]

    def test_catch_flags_never_on_the_wire(self, client):
        client.post("/api/sessions",
                    json=config_dict(catch_rate=0.5, n_target_trials=12))
        seen = set()
        for _ in range(12):
            r = client.get("/api/sessions/web1/next", params={"worker": "w"})
            body = r.json()
            seen.update(body.keys())
            client.post("/api/sessions/web1/labels",
                        json={"worker": "w",
                              "stimulus_id": body["stimulus_id"],
                              "response": "yes"})
        assert "is_catch" not in seen and "true_class" not in seen

    def test_fetch_is_idempotent(self, client):
        client.post("/api/sessions", json=config_dict())
        a = client.get("/api/sessions/web1/next", params={"worker": "w"}).json()
        b = client.get("/api/sessions/web1/next", params={"worker": "w"}).json()
        assert a == b

    def test_complete_status_after_last_label(self, client):
        client.post("/api/sessions", json=config_dict(n_target_trials=3))
        n = label_until_done(client, "web1", "w")
        assert n == 3
        r = client.get("/api/sessions/web1/next", params={"worker": "w"})
        assert r.json() == {"status": "complete", "total": 3,
                            "category": "dax"}

    def test_empty_worker_is_400(self, client):
        client.post("/api/sessions", json=config_dict())
        r = client.get("/api/sessions/web1/next", params={"worker": ""})
        assert r.status_code == 400


class TestLabels:
    def test_ack_shape(self, client):
        client.post("/api/sessions", json=config_dict())
        stim = client.get("/api/sessions/web1/next",
                          params={"worker": "w"}).json()
        r = client.post("/api/sessions/web1/labels",
                        json={"worker": "w",
                              "stimulus_id": stim["stimulus_id"],
                              "response": "no"})
        assert r.status_code == 200
        assert r.json() == {"progress": {"labeled": 1, "total": 16},
                            "qualified": True}

    def test_non_string_fields_are_400(self, client):
        client.post("/api/sessions", json=config_dict())
        r = client.post("/api/sessions/web1/labels",
                        json={"worker": "w", "stimulus_id": 7,
                              "response": "yes"})
        assert r.status_code == 400

    def test_bad_response_word_is_400(self, client):
        client.post("/api/sessions", json=config_dict())
        stim = client.get("/api/sessions/web1/next",
                          params={"worker": "w"}).json()
        r = client.post("/api/sessions/web1/labels",
                        json={"worker": "w",
                              "stimulus_id": stim["stimulus_id"],
                              "response": "maybe"})
        assert r.status_code == 400

    def test_unknown_stimulus_is_409(self, client):
        client.post("/api/sessions", json=config_dict())
        r = client.post("/api/sessions/web1/labels",
                        json={"worker": "w", "stimulus_id": "000005:w",
                              "response": "yes"})
        assert r.status_code == 409

    def test_unknown_session_is_404(self, client):
        r = client.post("/api/sessions/nope/labels",
                        json={"worker": "w", "stimulus_id": "000000:w",
                              "response": "yes"})
        assert r.status_code == 404

    def test_duplicate_submit_acks_idempotently(self, client):
        client.post("/api/sessions", json=config_dict())
        stim = client.get("/api/sessions/web1/next",
                          params={"worker": "w"}).json()
        body = {"worker": "w", "stimulus_id": stim["stimulus_id"],
                "response": "yes"}
        first = client.post("/api/sessions/web1/labels", json=body).json()
        again = client.post("/api/sessions/web1/labels", json=body).json()
        assert first == again
        nxt = client.get("/api/sessions/web1/next",
                         params={"worker": "w"}).json()
        assert nxt["index"] == 1


class TestTemplate:
    def test_not_ready_then_ready(self, client):
        client.post("/api/sessions", json=config_dict())
        r = client.get("/api/sessions/web1/template")
        assert r.status_code == 409
        assert r.json()["status"] == "not_ready"
        assert "reason" in r.json()

        answers = iter(["yes", "no"])
        for _ in range(2):
            stim = client.get("/api/sessions/web1/next",
                              params={"worker": "w"}).json()
            client.post("/api/sessions/web1/labels",
                        json={"worker": "w",
                              "stimulus_id": stim["stimulus_id"],
                              "response": next(answers)})
        r = client.get("/api/sessions/web1/template")
        assert r.status_code == 200
        body = r.json()
        assert sorted(body) == ["glyph", "trials_used", "values"]
        assert body["trials_used"] == 2
        assert len(body["values"]) == 16
        assert decode_png(body["glyph"]).shape == (16, 16)

    def test_template_matches_session_layer(self, client, tmp_path):
        client.post("/api/sessions", json=config_dict(n_target_trials=10))
        label_until_done(client, "web1", "w",
                         respond=lambda k: "yes" if k % 2 else "no")
        wire = client.get("/api/sessions/web1/template").json()

        offline = LabelingSession.load(str(tmp_path / "data"), "web1")
        try:
            template, _ = offline.current_template()
        finally:
            offline.close()
        assert wire["values"] == [float(v) for v in template.values]
        assert wire["trials_used"] == template.trials_used

    def test_unknown_session_is_404(self, client):
        assert client.get("/api/sessions/nope/template").status_code == 404


class TestExport:
    def test_ndjson_stream_matches_log(self, client, tmp_path):
        client.post("/api/sessions", json=config_dict(n_target_trials=6))
        label_until_done(client, "web1", "w")
        r = client.get("/api/sessions/web1/export")
        assert r.status_code == 200
        assert r.headers["content-type"].startswith("application/x-ndjson")
        log_path = tmp_path / "data" / "web1" / "trials.jsonl"
        assert r.text == log_path.read_text()
        records = [json.loads(line) for line in r.text.splitlines()]
        assert len(records) == 6
        assert all(rec["observer_id"] == "w" for rec in records)

    def test_empty_session_exports_empty_body(self, client):
        client.post("/api/sessions", json=config_dict())
        r = client.get("/api/sessions/web1/export")
        assert r.status_code == 200
        assert r.text == ""

    def test_unknown_session_is_404(self, client):
        assert client.get("/api/sessions/nope/export").status_code == 404


class TestPersistenceAcrossApps:
    def test_new_app_instance_serves_persisted_session(self, tmp_path):
        data_dir = str(tmp_path / "data")
        app1 = create_app(data_dir)
        with TestClient(app1) as c1:
            c1.post("/api/sessions", json=config_dict(n_target_trials=8))
            for k in range(4):
                stim = c1.get("/api/sessions/web1/next",
                              params={"worker": "w"}).json()
                c1.post("/api/sessions/web1/labels",
                        json={"worker": "w",
                              "stimulus_id": stim["stimulus_id"],
                              "response": "yes" if k % 2 else "no"})
            before = c1.get("/api/sessions/web1/template").json()
            pending = c1.get("/api/sessions/web1/next",
                             params={"worker": "w"}).json()
        app1.state.registry.close_all()

        app2 = create_app(data_dir)
        with TestClient(app2) as c2:
            assert c2.get("/api/sessions").json() == {"sessions": ["web1"]}
            after = c2.get("/api/sessions/web1/template").json()
            assert after == before
            resumed = c2.get("/api/sessions/web1/next",
                             params={"worker": "w"}).json()
            assert resumed == pending
        app2.state.registry.close_all()


class TestStaticMount:
    def test_static_dir_served_at_root(self, tmp_path):
        static = tmp_path / "static"
        static.mkdir()
        (static / "index.html").write_text("<html><body>hi</body></html>")
        app = create_app(str(tmp_path / "data"), static_dir=str(static))
        with TestClient(app) as c:
            r = c.get("/")
            assert r.status_code == 200
            assert "hi" in r.text
            # API still reachable alongside the mount.
            assert c.get("/api/sessions").status_code == 200
        app.state.registry.close_all()

    def test_missing_static_dir_is_ignored(self, tmp_path):
        app = create_app(str(tmp_path / "data"),
                         static_dir=str(tmp_path / "nope"))
        with TestClient(app) as c:
            assert c.get("/api/sessions").status_code == 200
        app.state.registry.close_all()


class TestRunServerAddr:
    def test_bad_addresses_rejected(self, tmp_path):
        for addr in ("localhost", "host:", ":port", "host:12x4"):
            with pytest.raises(InputError, match="host:port"):
                run_server(addr, str(tmp_path))
