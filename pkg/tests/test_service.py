import threading

import httpx
import numpy as np
import pytest

from sdfg.gallery import fixture
from sdfg.serialization import graph_hash, to_json
from sdfg.service import make_server


@pytest.fixture
def client():
    server = make_server(fixture("matmul").sdfg)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    with httpx.Client(base_url=base, timeout=10.0) as c:
        yield c
    server.shutdown()


class TestGraphAndMatches:
    def test_graph_view(self, client):
        r = client.get("/api/graph")
        assert r.status_code == 200
        body = r.json()
        assert body["view"]["name"] == "matmul"
        kinds = {n["kind"] for s in body["view"]["states"] for n in s["nodes"]}
        assert {"MapEntry", "Tasklet", "Reduce"} <= kinds
        labels = [e["label"] for s in body["view"]["states"]
                  for e in s["edges"]]
        assert any("(1)" in lbl for lbl in labels)

    def test_matches_include_fusion(self, client):
        r = client.get("/api/matches")
        names = [m["transformation"] for m in r.json()["matches"]]
        assert "MapReduceFusion" in names


class TestApplyUndoHistory:
    def test_apply_undo_cycle(self, client):
        original = client.get("/api/graph").json()["hash"]
        matches = client.get("/api/matches").json()["matches"]
        fusion = next(m for m in matches
                      if m["transformation"] == "MapReduceFusion")
        node_count = sum(len(s["nodes"]) for s in
                         client.get("/api/graph").json()["view"]["states"])

        r = client.post("/api/apply", json={"match_id": fusion["id"]})
        assert r.status_code == 200
        fused_view = client.get("/api/graph").json()["view"]
        fused_count = sum(len(s["nodes"]) for s in fused_view["states"])
        # the transient and the reduction node are gone; an init state appears
        mult = next(s for s in fused_view["states"] if s["name"] == "mult")
        assert not any(n["kind"] == "Reduce" for n in mult["nodes"])

        history = client.get("/api/history").json()
        assert len(history["history"]) == 2

        r = client.post("/api/undo", json={})
        assert r.status_code == 200
        assert client.get("/api/graph").json()["hash"] == original
        history = client.get("/api/history").json()
        assert len(history["history"]) == 2 and history["current"] == 0

    def test_stale_match_id_409(self, client):
        matches = client.get("/api/matches").json()["matches"]
        fusion = next(m for m in matches
                      if m["transformation"] == "MapReduceFusion")
        assert client.post("/api/apply",
                           json={"match_id": fusion["id"]}).status_code == 200
        r = client.post("/api/apply", json={"match_id": fusion["id"]})
        assert r.status_code == 409

    def test_stale_version_409(self, client):
        r = client.post("/api/undo", json={"version": 999})
        assert r.status_code == 409

    def test_journal_matches_current_hash(self, client):
        matches = client.get("/api/matches").json()["matches"]
        fusion = next(m for m in matches
                      if m["transformation"] == "MapReduceFusion")
        client.post("/api/apply", json={"match_id": fusion["id"]})
        journal = client.get("/api/journal").json()
        current = client.get("/api/graph").json()["hash"]
        assert journal["final_hash"] == current
        assert journal["replayable"] is True
        from sdfg.rewriting import replay_journal
        replayed = replay_journal(fixture("matmul").sdfg, journal["entries"])
        assert graph_hash(replayed) == current


class TestRunEndpoint:
    def test_run_reports_outputs_and_counters(self, client):
        payload = {"inputs": {"A": [[1, 0], [0, 1]], "B": [[1, 2], [3, 4]],
                              "C": [[0, 0], [0, 0]]},
                   "symbols": {"M": 2, "N": 2, "K": 2}}
        r = client.post("/api/run", json=payload)
        assert r.status_code == 200
        report = r.json()["report"]
        assert report["outputs"]["C"] == [[1.0, 2.0], [3.0, 4.0]]
        assert report["total_moved"] > 0

    def test_movement_counters_change_across_local_storage(self, client):
        payload = {"inputs": {"A": np.eye(8).tolist(),
                              "B": np.arange(64.).reshape(8, 8).tolist(),
                              "C": np.zeros((8, 8)).tolist()},
                   "symbols": {"M": 8, "N": 8, "K": 8}}
        before = client.post("/api/run", json=payload).json()["report"]
        for name, params in (("MapReduceFusion", {}), ("MapTiling", {"tile": 4}),
                             ("LocalStorage", {"data": "B"})):
            matches = client.get("/api/matches").json()["matches"]
            m = next(x for x in matches if x["transformation"] == name)
            r = client.post("/api/apply", json={"match_id": m["id"],
                                                "params": params})
            assert r.status_code == 200, r.text
        after = client.post("/api/run", json=payload).json()["report"]
        assert after["outputs"]["C"] == before["outputs"]["C"]
        assert after["elements_moved"] != before["elements_moved"]

    def test_run_failure_is_422(self, client):
        r = client.post("/api/run", json={"inputs": {}, "symbols": {}})
        assert r.status_code == 422


class TestNodeEdits:
    def test_edit_map_range_revalidates(self, client):
        view = client.get("/api/graph").json()["view"]
        state = next(s for s in view["states"] if s["name"] == "mult")
        entry = next(n for n in state["nodes"] if n["kind"] == "MapEntry")
        r = client.post("/api/node", json={
            "state": "mult", "id": entry["id"], "attribute": "ranges",
            "value": ["0:M - 1", "0:N - 1", "0:K - 2"]})
        assert r.status_code == 200
        view = client.get("/api/graph").json()["view"]
        state = next(s for s in view["states"] if s["name"] == "mult")
        entry2 = next(n for n in state["nodes"] if n["kind"] == "MapEntry")
        assert "K - 2" in entry2["label"]

    def test_validation_breaking_edit_rejected_422(self, client):
        view = client.get("/api/graph").json()["view"]
        state = next(s for s in view["states"] if s["name"] == "mult")
        entry = next(n for n in state["nodes"] if n["kind"] == "MapEntry")
        before = client.get("/api/graph").json()["hash"]
        r = client.post("/api/node", json={
            "state": "mult", "id": entry["id"], "attribute": "schedule",
            "value": "fpga"})
        assert r.status_code == 422
        assert "diagnostics" in r.json()
        assert client.get("/api/graph").json()["hash"] == before


class TestSessionLoading:
    def test_post_graph_resets_session(self, client):
        doc = to_json(fixture("laplace").sdfg)
        r = client.post("/api/graph", json=doc)
        assert r.status_code == 200
        assert client.get("/api/graph").json()["view"]["name"] == "laplace"
