import json

import pytest
import torch
from fastapi.testclient import TestClient

from planforge.data import synth_corpus
from planforge.draft import ModelConfig
from planforge.service import create_app
from planforge.training import TrainConfig, save_checkpoint, train

torch.set_num_threads(1)

TINY = ModelConfig(d_model=32, n_layers=1, n_heads=2, max_len=64)


@pytest.fixture(scope="module")
def corpus():
    return synth_corpus(10, room_count_range=(4, 5), seed=41)


@pytest.fixture(scope="module")
def ckpt_path(corpus, tmp_path_factory):
    cfg = TrainConfig(epochs=1, batch_size=5, n_r=1, seed=1, model=TINY)
    draft, refiner, stats, _ = train(corpus, cfg)
    path = tmp_path_factory.mktemp("model") / "tiny.pt"
    save_checkpoint(path, draft, refiner, stats, corpus[0].floorplan.vocab, cfg)
    return str(path)


@pytest.fixture
def client(ckpt_path, tmp_path):
    app = create_app(model_path=ckpt_path, store_path=str(tmp_path / "store.json"))
    return TestClient(app)


@pytest.fixture
def degraded_client(tmp_path):
    app = create_app(model_path=None, store_path=str(tmp_path / "store.json"))
    return TestClient(app)


def make_session(client, corpus, i=0):
    res = client.post("/v1/sessions", json={"diagram": corpus[i].diagram.to_dict()})
    assert res.status_code == 201
    return res.json()["session_id"]


class TestHealth:
    def test_ok_with_model(self, client):
        doc = client.get("/v1/health").json()
        assert doc["status"] == "ok"
        assert len(doc["model_hash"]) == 16

    def test_degraded_without_model(self, degraded_client):
        doc = degraded_client.get("/v1/health").json()
        assert doc["status"] == "degraded"
        assert "model_hash" not in doc

    def test_openapi_served_at_spec(self, client):
        doc = client.get("/v1/spec").json()
        assert doc["info"]["title"] == "planforge"
        paths = set(doc["paths"])
        assert {"/v1/sessions", "/v1/health", "/v1/sessions/{session_id}/generate"} <= paths


class TestSessions:
    def test_create_and_fetch(self, client, corpus):
        sid = make_session(client, corpus)
        doc = client.get(f"/v1/sessions/{sid}").json()
        assert doc["session_id"] == sid
        assert doc["diagram"] == corpus[0].diagram.to_dict()
        assert doc["candidates"] == []
        assert doc["history"][0]["event"] == "created"

    def test_invalid_diagram_is_422(self, client):
        bad = {"nodes": [{"id": "a", "category": "bedroom"}], "edges": [["a", "a"]]}
        assert client.post("/v1/sessions", json={"diagram": bad}).status_code == 422

    def test_malformed_body_is_422(self, client):
        assert client.post("/v1/sessions", json={"nope": 1}).status_code == 422

    def test_unknown_session_is_404(self, client):
        assert client.get("/v1/sessions/doesnotexist").status_code == 404


class TestGenerate:
    def test_generate_returns_candidates(self, client, corpus):
        sid = make_session(client, corpus)
        res = client.post(
            f"/v1/sessions/{sid}/generate",
            json={"num_candidates": 2, "seed": 7},
        )
        assert res.status_code == 200
        doc = res.json()
        assert len(doc["candidates"]) == 2
        for cand in doc["candidates"]:
            assert cand["session_id"] == sid
            assert cand["compatibility"] >= 0
            assert len(cand["floorplan"]["elements"]) == len(corpus[0].diagram.nodes)
        # session history and candidate list updated
        session = client.get(f"/v1/sessions/{sid}").json()
        assert [c["candidate_id"] for c in doc["candidates"]] == session["candidates"]
        assert session["history"][-1]["event"] == "generate"

    def test_generate_deterministic_given_seed(self, client, corpus):
        sid = make_session(client, corpus, i=1)
        body = {"num_candidates": 1, "seed": 3}
        a = client.post(f"/v1/sessions/{sid}/generate", json=body).json()
        b = client.post(f"/v1/sessions/{sid}/generate", json=body).json()
        assert a["candidates"][0]["floorplan"] == b["candidates"][0]["floorplan"]
        assert a["candidates"][0]["trace"] == b["candidates"][0]["trace"]

    def test_unknown_session_404(self, client):
        assert client.post("/v1/sessions/nope/generate", json={}).status_code == 404

    def test_degraded_model_409(self, degraded_client, corpus):
        sid = make_session(degraded_client, corpus)
        res = degraded_client.post(f"/v1/sessions/{sid}/generate", json={})
        assert res.status_code == 409

    def test_invalid_params_422(self, client, corpus):
        sid = make_session(client, corpus)
        res = client.post(f"/v1/sessions/{sid}/generate", json={"top_k": 0})
        assert res.status_code == 422
        res = client.post(
            f"/v1/sessions/{sid}/generate",
            json={"locks": {"ghost": [0, 0, 10, 10]}},
        )
        assert res.status_code == 422
        res = client.post(
            f"/v1/sessions/{sid}/generate", json={"num_candidates": "many"}
        )
        assert res.status_code == 422


class TestRefine:
    def _generated(self, client, corpus, i=2):
        sid = make_session(client, corpus, i=i)
        doc = client.post(
            f"/v1/sessions/{sid}/generate", json={"num_candidates": 1, "seed": 1}
        ).json()
        return sid, doc["candidates"][0]

    def test_refine_with_edit(self, client, corpus):
        sid, cand = self._generated(client, corpus)
        room_index = cand["floorplan"]["elements"][0]["room_index"]
        res = client.post(
            f"/v1/sessions/{sid}/refine",
            json={
                "candidate_id": cand["candidate_id"],
                "edits": {str(room_index): [16, 16, 96, 96]},
                "iters": 2,
            },
        )
        assert res.status_code == 200
        doc = res.json()
        assert doc["parent"] == cand["candidate_id"]
        edited = next(
            e for e in doc["floorplan"]["elements"] if e["room_index"] == room_index
        )
        assert edited["box"] == [16, 16, 96, 96]
        assert len(doc["trace"]) == 3

    def test_refine_unknown_candidate_404(self, client, corpus):
        sid = make_session(client, corpus)
        res = client.post(
            f"/v1/sessions/{sid}/refine", json={"candidate_id": "nope"}
        )
        assert res.status_code == 404

    def test_refine_foreign_candidate_404(self, client, corpus):
        sid1, cand = self._generated(client, corpus, i=3)
        sid2 = make_session(client, corpus, i=4)
        res = client.post(
            f"/v1/sessions/{sid2}/refine", json={"candidate_id": cand["candidate_id"]}
        )
        assert res.status_code == 404

    def test_refine_bad_edit_422(self, client, corpus):
        sid, cand = self._generated(client, corpus, i=5)
        res = client.post(
            f"/v1/sessions/{sid}/refine",
            json={"candidate_id": cand["candidate_id"], "edits": {"999": [0, 0, 1, 1]}},
        )
        assert res.status_code == 422


class TestRender:
    def test_svg_for_candidate(self, client, corpus):
        sid = make_session(client, corpus, i=6)
        doc = client.post(
            f"/v1/sessions/{sid}/generate", json={"num_candidates": 1, "seed": 2}
        ).json()
        cid = doc["candidates"][0]["candidate_id"]
        res = client.get(f"/v1/render/{cid}.svg")
        assert res.status_code == 200
        assert res.headers["content-type"].startswith("image/svg+xml")
        assert res.text.startswith("<svg ")
        n = len(doc["candidates"][0]["floorplan"]["elements"])
        assert res.text.count('<g class="element">') == n

    def test_unknown_candidate_404(self, client):
        assert client.get("/v1/render/nope.svg").status_code == 404


class TestPersistence:
    def test_store_survives_restart(self, ckpt_path, tmp_path, corpus):
        store = str(tmp_path / "store.json")
        c1 = TestClient(create_app(model_path=ckpt_path, store_path=store))
        sid = make_session(c1, corpus, i=7)
        doc = c1.post(
            f"/v1/sessions/{sid}/generate", json={"num_candidates": 1, "seed": 5}
        ).json()
        cid = doc["candidates"][0]["candidate_id"]
        # fresh app instance over the same store file
        c2 = TestClient(create_app(model_path=ckpt_path, store_path=store))
        assert c2.get(f"/v1/sessions/{sid}").status_code == 200
        assert c2.get(f"/v1/render/{cid}.svg").status_code == 200
        with open(store) as fh:
            blob = json.load(fh)
        assert sid in blob["sessions"]

    def test_bad_checkpoint_path_degrades(self, tmp_path, corpus):
        client = TestClient(
            create_app(model_path=str(tmp_path / "missing.pt"), store_path=None)
        )
        doc = client.get("/v1/health").json()
        assert doc["status"] == "degraded" and "detail" in doc
