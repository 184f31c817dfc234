from __future__ import annotations

import json
import socket
import threading
import time

import httpx
import pytest
import uvicorn
from fastapi.testclient import TestClient

from revstream.service import create_app


@pytest.fixture
def client():
    with TestClient(create_app()) as c:
        yield c


@pytest.fixture(scope="module")
def live_server():
    """A real uvicorn server; TestClient buffers SSE bodies, this does not."""
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(create_app(), host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started and time.time() < deadline:
        time.sleep(0.01)
    assert server.started
    with httpx.Client(base_url=f"http://127.0.0.1:{port}", timeout=30.0) as c:
        yield c
    server.should_exit = True
    thread.join(timeout=5)


def sse_frames(stream_lines):
    """Parse `data:` payloads out of an SSE line iterator."""
    for line in stream_lines:
        if line.startswith("data: "):
            yield json.loads(line[len("data: "):])


def collect_stream(client, session_id: str, from_seq: int = 1) -> list[dict]:
    frames = []
    with client.stream("GET", f"/sessions/{session_id}/events",
                       params={"from_seq": from_seq}) as response:
        for frame in sse_frames(response.iter_lines()):
            frames.append(frame)
            if frame.get("kind") == "end":
                break
    return frames


def wait_done(client, session_id: str, timeout: float = 10.0) -> dict:
    deadline = time.time() + timeout
    while time.time() < deadline:
        state = client.get(f"/sessions/{session_id}").json()
        if state["status"] != "running":
            return state
        time.sleep(0.02)
    raise AssertionError("session did not finish in time")


def test_create_session_happy_path(client):
    handle = client.post("/sessions", json={
        "scenario": "event_planning", "step_delay": 0.02,
    }).json()
    assert handle["status"] == "running"
    assert handle["config"]["plan_length"] == 15
    wait_done(client, handle["session_id"])


def test_create_session_unknown_scenario(client):
    response = client.post("/sessions", json={"scenario": "mars_base"})
    assert response.status_code == 400
    assert "mars_base" in response.json()["detail"]


def test_create_session_chat_without_credentials(client, monkeypatch):
    monkeypatch.delenv("CHAT_API_BASE", raising=False)
    monkeypatch.delenv("CHAT_API_KEY", raising=False)
    response = client.post("/sessions", json={"scenario": "travel", "backend": "chat"})
    assert response.status_code == 400


def test_full_replay_of_completed_session(client):
    handle = client.post("/sessions", json={"scenario": "report_publish"}).json()
    wait_done(client, handle["session_id"])
    frames = collect_stream(client, handle["session_id"])
    assert frames[-1]["kind"] == "end"
    seqs = [f["seq"] for f in frames[:-1]]
    assert seqs == list(range(1, len(seqs) + 1))
    record = client.get(f"/sessions/{handle['session_id']}/record").json()
    assert len(record["trace"]) == len(seqs)


def test_mid_run_injection_shows_phases(live_server):
    handle = live_server.post("/sessions", json={
        "scenario": "event_planning", "step_delay": 0.05,
    }).json()
    sid = handle["session_id"]
    # watch the live stream until the first K-class act (the proposal) lands
    seen_k = False
    with live_server.stream("GET", f"/sessions/{sid}/events") as response:
        for frame in sse_frames(response.iter_lines()):
            if frame.get("kind") == "end":
                break
            if frame.get("kind") == "act" and frame.get("class") == "K":
                seen_k = True
                break
    assert seen_k
    ack = live_server.post(f"/sessions/{sid}/inject", json={"preset": "substitutive"}).json()
    assert ack["accepted"] and ack["queue_position"] == 1
    wait_done(live_server, sid)
    frames = collect_stream(live_server, sid)
    kinds = [(f.get("kind"), f.get("phase")) for f in frames]
    assert ("inj", None) in kinds
    assert any(k == "act" and p == "compensation" for k, p in kinds)
    comp_at = min(i for i, (k, p) in enumerate(kinds) if p == "compensation")
    assert any(k == "act" and p == "replanned" for k, p in kinds[comp_at:])


def test_injection_after_completion_conflicts(client):
    handle = client.post("/sessions", json={"scenario": "travel"}).json()
    wait_done(client, handle["session_id"])
    response = client.post(f"/sessions/{handle['session_id']}/inject",
                           json={"preset": "substitutive"})
    assert response.status_code == 409


def test_malformed_revision_rejected(client):
    handle = client.post("/sessions", json={
        "scenario": "event_planning", "step_delay": 0.05,
    }).json()
    response = client.post(f"/sessions/{handle['session_id']}/inject",
                           json={"text": "no type"})
    assert response.status_code == 400
    wait_done(client, handle["session_id"])


def test_resume_from_seq(client):
    handle = client.post("/sessions", json={"scenario": "event_planning"}).json()
    wait_done(client, handle["session_id"])
    full = collect_stream(client, handle["session_id"])
    resumed = collect_stream(client, handle["session_id"], from_seq=13)
    assert [f["seq"] for f in resumed[:-1]] == [f["seq"] for f in full[:-1]][12:]
    assert resumed[0]["seq"] == 13


def test_two_rapid_injections_fifo(client):
    handle = client.post("/sessions", json={
        "scenario": "event_planning", "step_delay": 0.03,
    }).json()
    sid = handle["session_id"]
    time.sleep(0.1)
    first = client.post(f"/sessions/{sid}/inject", json={"preset": "additive"}).json()
    second = client.post(f"/sessions/{sid}/inject", json={"preset": "substitutive"}).json()
    assert (first["queue_position"], second["queue_position"]) == (1, 2)
    wait_done(client, sid)
    frames = collect_stream(client, sid)
    inj = [f["summary"] for f in frames if f.get("kind") == "inj"]
    assert len(inj) == 2
    assert inj[0].startswith("additive") and inj[1].startswith("substitutive")


def test_injection_ack_while_tool_call_in_flight(client):
    """The channel never blocks on the loop: the ack returns while the
    session is still mid-plan."""
    handle = client.post("/sessions", json={
        "scenario": "event_planning", "step_delay": 0.05,
    }).json()
    sid = handle["session_id"]
    t0 = time.time()
    ack = client.post(f"/sessions/{sid}/inject", json={"preset": "additive"}).json()
    elapsed = time.time() - t0
    assert ack["accepted"]
    assert elapsed < 0.75  # a full session at this pacing takes far longer
    assert client.get(f"/sessions/{sid}").json()["status"] == "running"
    wait_done(client, sid)


def test_replay_equivalence_with_record(client):
    handle = client.post("/sessions", json={"scenario": "event_planning",
                                            "step_delay": 0.01}).json()
    sid = handle["session_id"]
    time.sleep(0.15)
    client.post(f"/sessions/{sid}/inject", json={"preset": "substitutive"})
    wait_done(client, sid)
    frames = collect_stream(client, sid)[:-1]
    record = client.get(f"/sessions/{sid}/record").json()
    assert [f["seq"] for f in frames] == [e["seq"] for e in record["trace"]]
    assert [f["kind"] for f in frames] == [e["kind"] for e in record["trace"]]


def test_cancellation_on_revoked_clause_rejected(client):
    handle = client.post("/sessions", json={
        "scenario": "event_planning", "step_delay": 0.05,
    }).json()
    sid = handle["session_id"]
    first = client.post(f"/sessions/{sid}/inject", json={"preset": "cancellation"})
    assert first.status_code == 200
    # wait until the revision is absorbed (catering clause flips to revoked)
    deadline = time.time() + 10
    while time.time() < deadline:
        spec = client.get(f"/sessions/{sid}/spec").json()
        statuses = {c["id"]: c["status"] for c in spec["clauses"]}
        if statuses.get("catering") == "revoked":
            break
        time.sleep(0.02)
    second = client.post(f"/sessions/{sid}/inject", json={"preset": "cancellation"})
    assert second.status_code == 400
    assert "revoked" in second.json()["detail"]
    wait_done(client, sid)


def test_unknown_target_clause_rejected(client):
    handle = client.post("/sessions", json={
        "scenario": "travel", "step_delay": 0.05,
    }).json()
    sid = handle["session_id"]
    response = client.post(f"/sessions/{sid}/inject", json={
        "rtype": "cancellation", "text": "drop it", "target_clause": "nonexistent",
    })
    assert response.status_code == 400
    assert "nonexistent" in response.json()["detail"]
    wait_done(client, sid)
