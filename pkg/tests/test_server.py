"""HTTP annotation service: queue, verdicts, metrics, clusters, auth."""

import time

import pytest
from fastapi.testclient import TestClient

from activereid.config import RunConfig
from activereid.dataset import generate_synthetic
from activereid.labels import apply_annotation
from activereid.metric import Pair
from activereid.orchestrator import Orchestrator
from activereid.server import AnnotationService, create_app


def make_service(identities=3, token=None, **config_overrides):
    m = generate_synthetic(
        identities=identities, cameras=2, tracklets_per_identity_per_camera=1,
        images_per_tracklet=2, dimension=4, seed=0,
    )
    cfg = RunConfig(s1=2, s2=1, s3=1, s4=3, t0=2, tpa_runs=2, **config_overrides)
    orch = Orchestrator(m, cfg)
    service = AnnotationService(orch)
    return m, service, TestClient(create_app(service, token=token))


def test_empty_queue_response():
    _, service, client = make_service()
    body = client.get("/queue/next").json()
    assert body["pair"] is None
    assert body["pending"] == 0
    assert body["generation"] == 0


def test_queue_hand_out_and_verdict_flow():
    _, service, client = make_service()
    service.queue.enqueue([Pair(0, 1), Pair(2, 3)])
    body = client.get("/queue/next").json()
    assert body["pair_id"] == "0-1"
    assert body["pair"] == [0, 1]
    assert body["pending"] == 2
    panels = body["tracklets"]
    assert [p["tracklet_id"] for p in panels] == [0, 1]
    assert all(len(p["images"]) == 2 for p in panels)
    assert all("feature" in img for p in panels for img in p["images"])

    r = client.post("/queue/0-1/verdict", json={"verdict": "match"})
    assert r.status_code == 200
    assert r.json()["accepted"] is True and r.json()["skipped"] is False
    # a second submit for the same pair is a conflict
    assert client.post("/queue/0-1/verdict", json={"verdict": "match"}).status_code == 409


def test_skip_requeues():
    _, service, client = make_service()
    service.queue.enqueue([Pair(0, 1)])
    client.get("/queue/next")
    r = client.post("/queue/0-1/verdict", json={"verdict": "skip"})
    assert r.status_code == 200 and r.json()["skipped"] is True
    assert client.get("/queue/next").json()["pair_id"] == "0-1"


def test_verdict_error_codes():
    _, service, client = make_service()
    assert client.post("/queue/4-5/verdict", json={"verdict": "match"}).status_code == 404
    assert client.post("/queue/wat/verdict", json={"verdict": "match"}).status_code == 400
    assert client.post("/queue/0-0/verdict", json={"verdict": "match"}).status_code == 400
    service.queue.enqueue([Pair(0, 1)])
    assert client.post("/queue/0-1/verdict", json={"verdict": "perhaps"}).status_code == 422


def test_metrics_and_clusters_reflect_state():
    m, service, client = make_service()
    orch = service.orchestrator
    body = client.get("/metrics").json()
    assert body["tp_manual"] == 0
    assert body["T_pa"] > 0
    assert body["gained_TP_ratio"] == 0.0
    before = client.get("/clusters").json()
    assert before["cluster_count"] == m.num_tracklets

    ident = m.tracklet_identities()
    tp = next(
        Pair.of(a, b)
        for a in m.tracklet_ids for b in m.tracklet_ids
        if a < b and ident[a] == ident[b]
    )
    orch._apply_verdict(1, tp, "match")
    body = client.get("/metrics").json()
    assert body["tp_manual"] == 1
    assert body["gained_TP_ratio"] > 0
    after = client.get("/clusters").json()
    assert after["cluster_count"] == m.num_tracklets - 1
    merged = next(c for c in after["clusters"] if len(c["tracklets"]) == 2)
    assert merged["tracklets"] == sorted([tp.a, tp.b])


def test_pair_status_endpoint():
    m, service, client = make_service()
    orch = service.orchestrator
    assert client.get("/pairs/0/1").json()["status"] == "undecided"
    apply_annotation(orch.state, Pair(0, 1), "nomatch")
    assert client.get("/pairs/0/1").json()["status"] == "cannot_link"
    assert client.get("/pairs/1/0").json()["status"] == "cannot_link"
    assert client.get("/pairs/0/999").status_code == 404
    assert client.get("/pairs/3/3").status_code == 400


def test_token_guards_api_routes():
    _, service, client = make_service(token="sekrit")
    assert client.get("/metrics").status_code == 401
    assert client.get("/metrics", headers={"x-auth-token": "wrong"}).status_code == 401
    assert client.get("/metrics", headers={"x-auth-token": "sekrit"}).status_code == 200


def test_live_loop_accepts_human_verdicts():
    # drive the real orchestrator thread through the HTTP surface
    m, service, client = make_service(identities=3, max_iterations=2)
    ident = m.tracklet_identities()
    service.start()
    answered = 0
    deadline = time.monotonic() + 30
    try:
        while time.monotonic() < deadline:
            body = client.get("/queue/next").json()
            if body["pair"] is None:
                if not service._thread.is_alive():
                    break
                time.sleep(0.02)
                continue
            a, b = body["pair"]
            verdict = "match" if ident[a] == ident[b] else "nomatch"
            assert client.post(
                f"/queue/{body['pair_id']}/verdict", json={"verdict": verdict}
            ).status_code == 200
            answered += 1
        service._thread.join(timeout=10)
        assert not service._thread.is_alive(), "loop did not finish in time"
    finally:
        service.stop()
    metrics = client.get("/metrics").json()
    assert answered > 0
    # closure inside a batch can pre-decide an already-issued pair, which is
    # then counted as wasted rather than manual
    assert metrics["tp_manual"] + metrics["wasted"] == answered
    assert metrics["generation"] == 2
    assert len(metrics["history"]) == 2
