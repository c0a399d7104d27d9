"""Orchestrator HTTP surface: runs, busy conflicts, SSE, persistence, chat."""

import json
import time

import pytest
from fastapi.testclient import TestClient

import mcplab.service
from mcplab.fixtures import FixtureState, build_fixture_server
from mcplab.protocol.transport import TransportConfig
from mcplab.service import Orchestrator, OrchestratorConfig, create_app
from mcplab.simlab import SimLab, build_simlab_server

_counter = iter(range(1, 100000))


def bid():
    return f"s{next(_counter)}"


def lit(value):
    return {"id": bid(), "kind": "literal", "value": value}


def call(server, tool, **args):
    return {"id": bid(), "kind": "tool_call", "server": server, "tool": tool, "args": args}


def repeat(count, *body):
    return {"id": bid(), "kind": "repeat", "count": lit(count), "body": list(body)}


def doc(*blocks):
    return {"version": 1, "blocks": list(blocks)}


def wait_until(predicate, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.01)
    return False


def make_orchestrator(data_dir=None, script=None):
    config = OrchestratorConfig(
        data_dir=str(data_dir) if data_dir else None,
        agent_script=script or [],
    )
    orch = Orchestrator(config)
    orch.fixture_state = FixtureState()
    orch.host.attach_server("fix", build_fixture_server(orch.fixture_state))
    orch.host.attach_server("lab", build_simlab_server(SimLab()))
    return orch


@pytest.fixture
def orch():
    orch = make_orchestrator()
    yield orch
    orch.close()


@pytest.fixture
def client(orch):
    with TestClient(create_app(orch)) as client:
        yield client


def run_and_wait(client, document, timeout=10.0):
    response = client.post("/workflows/run", json=document)
    assert response.status_code == 200, response.text
    run_id = response.json()["run_id"]
    assert wait_until(
        lambda: client.get(f"/runs/{run_id}").json()["status"] != "running", timeout
    )
    return run_id, client.get(f"/runs/{run_id}").json()


# -- servers and toolbox --------------------------------------------------------


def test_servers_reports_mixed_statuses(orch, client):
    orch.host.register_server(
        "bad", TransportConfig(kind="stdio", command=["python3", "-c", "import sys; sys.exit(3)"])
    )
    body = client.get("/servers").json()
    by_alias = {s["alias"]: s for s in body["servers"]}
    assert set(by_alias) == {"fix", "lab", "bad"}
    assert by_alias["fix"]["status"] == "ready"
    assert "echo" in by_alias["fix"]["tools"]
    assert by_alias["lab"]["status"] == "ready"
    assert by_alias["bad"]["status"] == "failed"
    assert by_alias["bad"]["error"]


def test_refresh_unknown_alias_404(client):
    response = client.post("/servers/ghost/refresh")
    assert response.status_code == 404


def test_refresh_local_server_reports_failure(client):
    body = client.post("/servers/fix/refresh").json()
    assert body["status"] == "failed"
    assert "refresh" in body["error"]


def test_toolbox_bytes_are_stable(client):
    first = client.get("/toolbox")
    second = client.get("/toolbox")
    assert first.status_code == 200
    assert first.content == second.content
    parsed = json.loads(first.content)
    assert [c["name"] for c in parsed["categories"]] == ["Core", "Decision", "fix", "lab"]


# -- validation and runs --------------------------------------------------------


def test_validate_reports_errors(client):
    good = doc(call("fix", "echo", text=lit("hi")))
    body = client.post("/workflows/validate", json=good).json()
    assert body == {"valid": True, "errors": []}

    bad = doc(call("fix", "nope", text=lit("hi")))
    body = client.post("/workflows/validate", json=bad).json()
    assert body["valid"] is False
    assert body["errors"]


def test_non_object_body_is_400(client):
    response = client.post("/workflows/validate", json=[1, 2, 3])
    assert response.status_code == 400
    assert response.json()["errors"]


def test_run_executes_and_snapshot_has_events(client):
    run_id, snapshot = run_and_wait(client, doc(call("fix", "echo", text=lit("hi"))))
    assert snapshot["status"] == "succeeded"
    kinds = [e["kind"] for e in snapshot["events"]]
    assert kinds[0] == "run_started"
    assert kinds[-1] == "run_finished"
    finished = [e for e in snapshot["events"] if e["kind"] == "block_finished"]
    assert finished[0]["output"]["value"] == "hi"

    listing = client.get("/runs").json()["runs"]
    assert [r["run_id"] for r in listing] == [run_id]
    assert listing[0]["event_count"] == len(snapshot["events"])


def test_run_rejects_invalid_document(client):
    response = client.post("/workflows/run", json=doc(call("fix", "nope")))
    assert response.status_code == 400
    assert response.json()["errors"]


def test_run_failure_is_reported(client):
    _, snapshot = run_and_wait(client, doc(call("fix", "boom")))
    assert snapshot["status"] == "failed"
    assert "boom" in snapshot["error"]
    assert snapshot["events"][-1]["kind"] == "run_finished"


def test_unknown_run_404(client):
    assert client.get("/runs/nope").status_code == 404
    assert client.post("/runs/nope/cancel").status_code == 404
    assert client.get("/runs/nope/events").status_code == 404


def test_busy_alias_conflicts_and_cancel(client):
    long_doc = doc(repeat(40, call("fix", "slow", seconds=lit(0.05))))
    run_id = client.post("/workflows/run", json=long_doc).json()["run_id"]

    conflict = client.post("/workflows/run", json=doc(call("fix", "echo", text=lit("x"))))
    assert conflict.status_code == 409
    assert conflict.json()["busy"] == ["fix"]

    # a run touching only other servers is allowed alongside
    ok = client.post("/workflows/run", json=doc(call("lab", "list_dyes")))
    assert ok.status_code == 200

    assert client.post(f"/runs/{run_id}/cancel").status_code == 200
    assert wait_until(lambda: client.get(f"/runs/{run_id}").json()["status"] == "cancelled")

    snapshot = client.get(f"/runs/{run_id}").json()
    assert snapshot["events"][-1]["kind"] == "run_cancelled"
    cancelled_blocks = [
        e
        for e in snapshot["events"]
        if e["kind"] == "block_finished" and (e.get("output") or {}).get("cancelled")
    ]
    assert cancelled_blocks  # the open repeat was closed, not dropped

    # alias freed again after cancellation
    assert wait_until(
        lambda: client.post(
            "/workflows/run", json=doc(call("fix", "echo", text=lit("y")))
        ).status_code
        == 200
    )


# -- run event stream ------------------------------------------------------------


def read_sse(response, stop_kinds=("run_finished", "run_cancelled"), max_frames=500):
    frames = []
    for line in response.iter_lines():
        if not line.startswith("data: "):
            continue
        frames.append(json.loads(line[len("data: ") :]))
        if frames[-1].get("kind") in stop_kinds or len(frames) >= max_frames:
            break
    return frames


def test_run_stream_replays_then_tails_live(client, monkeypatch):
    monkeypatch.setattr(mcplab.service, "HEARTBEAT_SECONDS", 0.05)
    run_id = client.post(
        "/workflows/run", json=doc(repeat(5, call("fix", "slow", seconds=lit(0.05))))
    ).json()["run_id"]
    with client.stream("GET", f"/runs/{run_id}/events") as response:
        frames = read_sse(response)
    seqs = [f["seq"] for f in frames]
    assert seqs == sorted(set(seqs))  # strictly increasing, no duplicates
    assert frames[0]["kind"] == "run_started"
    assert frames[-1]["kind"] == "run_finished"
    # one repeat block plus five tool calls, each opened and closed
    assert sum(1 for f in frames if f["kind"] == "block_started") == 6
    assert sum(1 for f in frames if f["kind"] == "block_finished") == 6


def test_run_stream_replays_finished_run(client):
    run_id, _ = run_and_wait(client, doc(call("fix", "echo", text=lit("hi"))))
    with client.stream("GET", f"/runs/{run_id}/events") as response:
        frames = read_sse(response)
    assert frames[0]["kind"] == "run_started"
    assert frames[-1]["kind"] == "run_finished"


# -- persistence -----------------------------------------------------------------


def test_runs_persist_and_survive_restart(tmp_path):
    orch = make_orchestrator(data_dir=tmp_path)
    with TestClient(create_app(orch)) as client:
        run_id, snapshot = run_and_wait(client, doc(call("fix", "echo", text=lit("hi"))))
    orch.close()

    log = tmp_path / f"{run_id}.jsonl"
    assert log.exists()
    lines = [json.loads(line) for line in log.read_text().splitlines() if line.strip()]
    assert [e["seq"] for e in lines] == list(range(len(lines)))
    assert lines[-1]["kind"] == "run_finished"
    assert len(lines) == len(snapshot["events"])

    # a fresh orchestrator on the same data dir serves the old run read-only
    fresh = Orchestrator(OrchestratorConfig(data_dir=str(tmp_path)))
    with TestClient(create_app(fresh)) as client:
        listing = client.get("/runs").json()["runs"]
        assert {"run_id": run_id, "status": "succeeded", "persisted": True} in listing

        body = client.get(f"/runs/{run_id}").json()
        assert body["persisted"] is True
        assert body["status"] == "succeeded"
        assert body["events"] == lines

        with client.stream("GET", f"/runs/{run_id}/events") as response:
            frames = read_sse(response)
        assert frames == lines
    fresh.close()


# -- chat ------------------------------------------------------------------------


def chat_orchestrator(script):
    return make_orchestrator(script=script)


def kinds(events):
    return [e["kind"] for e in events]


def test_chat_proposal_parks_then_approval_executes():
    orch = chat_orchestrator(
        [
            {"tool": "echo", "server": "fix", "args": {"text": "ping"}},
            {"text": "done"},
        ]
    )
    with TestClient(create_app(orch)) as client:
        body = client.post("/chat/s1", json={"text": "go"}).json()
        assert kinds(body["events"]) == ["user_message", "proposal"]
        proposal = body["events"][-1]["payload"]["proposal"]
        assert proposal["status"] == "pending"

        # a second message while parked is refused
        assert client.post("/chat/s1", json={"text": "more"}).status_code == 409

        body = client.post(
            f"/chat/s1/approvals/{proposal['id']}", json={"decision": "approve"}
        ).json()
        updates = [
            e["payload"]["proposal"]["status"]
            for e in body["events"]
            if e["kind"] == "proposal_update"
        ]
        assert updates == ["approved", "executed"]
        assert kinds(body["events"])[-1] == "assistant_message"
        assert orch.fixture_state.calls == ["echo"]

        snapshot = client.get("/chat/s1").json()
        assert snapshot["pending"] is None
        assert [m["role"] for m in snapshot["transcript"]] == [
            "user",
            "tool",
            "assistant",
        ]
    orch.close()


def test_chat_rejection_executes_nothing():
    orch = chat_orchestrator(
        [
            {"tool": "boom", "server": "fix", "args": {}},
            {"text": "understood"},
        ]
    )
    with TestClient(create_app(orch)) as client:
        body = client.post("/chat/s1", json={"text": "go"}).json()
        proposal_id = body["events"][-1]["payload"]["proposal"]["id"]
        body = client.post(
            f"/chat/s1/approvals/{proposal_id}", json={"decision": "reject"}
        ).json()
        statuses = [
            e["payload"]["proposal"]["status"]
            for e in body["events"]
            if e["kind"] == "proposal_update"
        ]
        assert statuses == ["rejected"]
        assert orch.fixture_state.calls == []
    orch.close()


def test_chat_auto_approve_runs_chain_unattended():
    orch = chat_orchestrator(
        [
            {"tool": "tick", "server": "fix", "args": {}},
            {"tool": "tick", "server": "fix", "args": {}},
            {"tool": "tick", "server": "fix", "args": {}},
            {"text": "done"},
        ]
    )
    with TestClient(create_app(orch)) as client:
        body = client.post("/chat/s1/auto-approve", json={"enabled": True}).json()
        assert body["enabled"] is True
        body = client.post("/chat/s1", json={"text": "go"}).json()
        assert orch.fixture_state.ticks == 3
        assert client.get("/chat/s1").json()["pending"] is None
        assert body["events"][-1]["kind"] == "assistant_message"
    orch.close()


def test_chat_auto_approve_releases_parked_proposal():
    orch = chat_orchestrator(
        [
            {"tool": "tick", "server": "fix", "args": {}},
            {"text": "after"},
        ]
    )
    with TestClient(create_app(orch)) as client:
        client.post("/chat/s1", json={"text": "go"})
        assert orch.fixture_state.ticks == 0
        body = client.post("/chat/s1/auto-approve", json={"enabled": True}).json()
        assert orch.fixture_state.ticks == 1
        assert kinds(body["events"])[0] == "auto_approve"
        assert body["events"][-1]["payload"] == {"text": "after"}
    orch.close()


def test_chat_input_validation(client):
    assert client.post("/chat/s1", json={"text": 42}).status_code == 400
    assert client.post("/chat/s1", json={"text": "   "}).status_code == 400
    assert client.post("/chat/s1", json={}).status_code == 400
    assert (
        client.post("/chat/s1/approvals/xyz", json={"decision": "maybe"}).status_code
        == 400
    )
    assert (
        client.post("/chat/s1/approvals/xyz", json={"decision": "approve"}).status_code
        == 404
    )
    assert client.post("/chat/s1/auto-approve", json={"enabled": "yes"}).status_code == 400


# the chat stream never ends on its own, so it is consumed directly instead of
# through TestClient (which buffers the complete response before returning)
def test_chat_stream_replays_then_tails(monkeypatch):
    monkeypatch.setattr(mcplab.service, "HEARTBEAT_SECONDS", 0.05)
    orch = chat_orchestrator([{"text": "hello"}])
    orch.agent.chat_turn("s1", "hi")
    session = orch.agent.session("s1")

    stream = mcplab.service.chat_event_stream(session)
    frames = [json.loads(next(stream).split("data: ", 1)[1]) for _ in range(2)]
    assert kinds(frames) == ["user_message", "assistant_message"]
    assert [f["seq"] for f in frames] == [0, 1]

    # idle gap yields a comment heartbeat, then live events resume
    assert next(stream) == ": keep-alive\n\n"
    session.emit("notice", {"message": "still here"})
    live = json.loads(next(stream).split("data: ", 1)[1])
    assert live["kind"] == "notice"

    stream.close()
    assert session.subscribers == []
    orch.close()


# -- config parsing ---------------------------------------------------------------


def test_config_from_dict_round_trip():
    raw = {
        "host": "0.0.0.0",
        "port": 9000,
        "decision_alias": "brain",
        "servers": [
            {"alias": "a", "transport": {"kind": "stdio", "command": ["python3", "-m", "x"]}},
            {"alias": "b", "transport": {"kind": "http", "base_url": "http://127.0.0.1:1/"}},
        ],
        "agent": {"backend": "scripted", "script": [{"text": "hi"}]},
    }
    config = OrchestratorConfig.from_dict(raw)
    assert config.port == 9000
    assert config.decision_alias == "brain"
    assert [s.alias for s in config.servers] == ["a", "b"]
    assert config.servers[0].transport.kind == "stdio"
    assert config.agent_script == [{"text": "hi"}]


def test_config_rejects_bad_entries():
    with pytest.raises(ValueError, match="duplicate server alias"):
        OrchestratorConfig.from_dict(
            {
                "servers": [
                    {"alias": "a", "transport": {"kind": "http", "base_url": "http://x/"}},
                    {"alias": "a", "transport": {"kind": "http", "base_url": "http://x/"}},
                ]
            }
        )
    with pytest.raises(ValueError, match="alias"):
        OrchestratorConfig.from_dict({"servers": [{"transport": {"kind": "http"}}]})
    with pytest.raises(ValueError, match="agent backend"):
        OrchestratorConfig.from_dict({"agent": {"backend": "psychic"}})
