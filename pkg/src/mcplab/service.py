"""Orchestrator: server registry + run manager + chat gateway behind HTTP.

One process owns the host connections. Workflows run on worker threads; a
server alias can be part of at most one live run at a time (starting a
second returns 409). Run events stream over SSE with full replay followed
by live tail, and are persisted as JSONL when a data directory is set, so
past runs survive a restart.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import socket
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from mcplab.agent import (
    AgentGateway,
    BackendReply,
    ChatApiBackend,
    PendingApprovalError,
    ProposalLookupError,
    ScriptedBackend,
    ToolCallRequest,
)
from mcplab.host import Host
from mcplab.protocol.transport import TransportConfig
from mcplab.toolbox import ToolboxDocument, generate_toolbox
from mcplab.workflow import (
    ExecutionEvent,
    Workflow,
    WorkflowValidationError,
    collect_server_aliases,
    execute,
    parse_workflow,
)

logger = logging.getLogger(__name__)

TERMINAL_EVENTS = ("run_finished", "run_cancelled")
HEARTBEAT_SECONDS = 15.0


@dataclass
class ServerSpec:
    alias: str
    transport: TransportConfig


@dataclass
class OrchestratorConfig:
    servers: list[ServerSpec] = field(default_factory=list)
    host: str = "127.0.0.1"
    port: int = 8765
    decision_alias: str = "decision"
    data_dir: str | None = None
    agent_backend: str = "scripted"  # scripted | chat-api
    agent_script: list[dict] = field(default_factory=list)
    frontend_dir: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "OrchestratorConfig":
        if not isinstance(raw, dict):
            raise ValueError("config must be a JSON object")
        servers = []
        aliases = set()
        for item in raw.get("servers") or []:
            if not isinstance(item, dict):
                raise ValueError("each server entry must be an object")
            alias = item.get("alias")
            if not isinstance(alias, str) or not alias:
                raise ValueError("server entry needs a non-empty alias")
            if alias in aliases:
                raise ValueError(f"duplicate server alias {alias!r}")
            aliases.add(alias)
            transport = TransportConfig.from_dict(item.get("transport") or {})
            servers.append(ServerSpec(alias, transport))
        agent = raw.get("agent") or {}
        backend = agent.get("backend", "scripted")
        if backend not in ("scripted", "chat-api"):
            raise ValueError(f"unknown agent backend {backend!r}")
        config = cls(
            servers=servers,
            host=raw.get("host", "127.0.0.1"),
            port=int(raw.get("port", 8765)),
            decision_alias=raw.get("decision_alias", "decision"),
            data_dir=raw.get("data_dir"),
            agent_backend=backend,
            agent_script=list(agent.get("script") or []),
            frontend_dir=raw.get("frontend_dir"),
        )
        return config

    @classmethod
    def from_file(cls, path: str) -> "OrchestratorConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _script_to_replies(script: list[dict]) -> list[BackendReply]:
    replies = []
    for step in script:
        if "text" in step:
            replies.append(BackendReply(text=step["text"]))
        elif "tool" in step:
            replies.append(
                BackendReply(
                    tool_call=ToolCallRequest(
                        step.get("server", ""), step["tool"], step.get("args") or {}
                    )
                )
            )
        else:
            raise ValueError(f"script step needs 'text' or 'tool': {step}")
    return replies


class BusyError(Exception):
    def __init__(self, aliases: set[str]):
        super().__init__(f"servers busy: {', '.join(sorted(aliases))}")
        self.aliases = sorted(aliases)


class UnknownRunError(Exception):
    pass


@dataclass
class RunRecord:
    run_id: str
    aliases: set[str]
    status: str = "running"
    error: str | None = None
    created_at: float = field(default_factory=time.time)
    events: list[ExecutionEvent] = field(default_factory=list)
    cancel: threading.Event = field(default_factory=threading.Event)
    lock: threading.Lock = field(default_factory=threading.Lock)
    subscribers: list[queue.Queue] = field(default_factory=list)
    log_file: Any = None

    def summary(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "error": self.error,
            "created_at": self.created_at,
            "servers": sorted(self.aliases),
            "event_count": len(self.events),
        }


class RunManager:
    def __init__(self, host: Host, data_dir: str | None = None):
        self._host = host
        self._records: dict[str, RunRecord] = {}
        self._busy: set[str] = set()
        self._lock = threading.Lock()
        self._data_dir = Path(data_dir) if data_dir else None
        if self._data_dir is not None:
            self._data_dir.mkdir(parents=True, exist_ok=True)

    def start(self, workflow: Workflow) -> RunRecord:
        aliases = collect_server_aliases(workflow)
        run_id = uuid.uuid4().hex[:12]
        with self._lock:
            clash = aliases & self._busy
            if clash:
                raise BusyError(clash)
            self._busy |= aliases
            record = RunRecord(run_id=run_id, aliases=aliases)
            if self._data_dir is not None:
                record.log_file = open(self._data_dir / f"{run_id}.jsonl", "a", encoding="utf-8")
            self._records[run_id] = record
        thread = threading.Thread(
            target=self._run, args=(record, workflow), name=f"run-{run_id}", daemon=True
        )
        thread.start()
        return record

    def _run(self, record: RunRecord, workflow: Workflow) -> None:
        def sink(event: ExecutionEvent) -> None:
            with record.lock:
                record.events.append(event)
                if record.log_file is not None:
                    record.log_file.write(json.dumps(event.to_dict()) + "\n")
                    record.log_file.flush()
                for q in record.subscribers:
                    q.put(event)

        try:
            state = execute(workflow, self._host, sink, run_id=record.run_id, cancel=record.cancel)
            status, error = state.status, state.error
        except Exception as exc:  # noqa: BLE001 - defensive: a run crash must be recorded
            logger.exception("run %s crashed", record.run_id)
            status, error = "failed", f"internal error: {exc}"
        with record.lock:
            record.status = status
            record.error = error
            if record.log_file is not None:
                record.log_file.close()
                record.log_file = None
        with self._lock:
            self._busy -= record.aliases

    def get(self, run_id: str) -> RunRecord:
        with self._lock:
            record = self._records.get(run_id)
        if record is None:
            raise UnknownRunError(f"no run {run_id!r}")
        return record

    def list_runs(self) -> list[RunRecord]:
        with self._lock:
            live = dict(self._records)
        records = sorted(live.values(), key=lambda r: r.created_at)
        return records

    def list_persisted(self) -> list[dict]:
        """Run ids and final status recovered from the data directory."""
        if self._data_dir is None:
            return []
        out = []
        for path in sorted(self._data_dir.glob("*.jsonl")):
            run_id = path.stem
            status = "interrupted"
            last = None
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        last = line
            if last:
                try:
                    kind = json.loads(last).get("kind")
                except json.JSONDecodeError:
                    kind = None
                if kind == "run_cancelled":
                    status = "cancelled"
                elif kind == "run_finished":
                    status = json.loads(last).get("output", {}).get("status", "succeeded")
            out.append({"run_id": run_id, "status": status, "persisted": True})
        return out

    def load_persisted_events(self, run_id: str) -> list[dict] | None:
        if self._data_dir is None:
            return None
        path = self._data_dir / f"{run_id}.jsonl"
        if not path.exists():
            return None
        events = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    events.append(json.loads(line))
        return events

    def cancel(self, run_id: str) -> RunRecord:
        record = self.get(run_id)
        record.cancel.set()
        return record

    def subscribe(self, run_id: str) -> tuple[list[ExecutionEvent], queue.Queue | None]:
        """Snapshot plus a live queue; queue is None when the run is over
        (the snapshot is then complete)."""
        record = self.get(run_id)
        with record.lock:
            snapshot = list(record.events)
            if snapshot and snapshot[-1].kind in TERMINAL_EVENTS:
                return snapshot, None
            q: queue.Queue = queue.Queue()
            record.subscribers.append(q)
            return snapshot, q

    def unsubscribe(self, run_id: str, q: queue.Queue) -> None:
        try:
            record = self.get(run_id)
        except UnknownRunError:
            return
        with record.lock:
            if q in record.subscribers:
                record.subscribers.remove(q)


class Orchestrator:
    def __init__(self, config: OrchestratorConfig):
        self.config = config
        self.host = Host()
        for spec in config.servers:
            try:
                self.host.register_server(spec.alias, spec.transport)
            except Exception as exc:  # noqa: BLE001 - startup must survive bad entries
                logger.warning("failed to register %s: %s", spec.alias, exc)
        self.runs = RunManager(self.host, config.data_dir)
        self.agent = AgentGateway(self.host, self._build_backend(config))

    @staticmethod
    def _build_backend(config: OrchestratorConfig):
        if config.agent_backend == "chat-api":
            backend = ChatApiBackend.from_env(dict(os.environ))
            if backend is not None:
                return backend
            logger.warning(
                "agent backend 'chat-api' needs MCPLAB_CHAT_URL and MCPLAB_CHAT_MODEL; "
                "falling back to an empty scripted backend"
            )
            return ScriptedBackend([])
        return ScriptedBackend(_script_to_replies(config.agent_script))

    def toolbox(self) -> ToolboxDocument:
        return generate_toolbox(self.host.list_tools(), self.config.decision_alias)

    def validate_workflow(self, doc) -> list[str]:
        try:
            parse_workflow(doc, self.host.list_tools())
        except WorkflowValidationError as exc:
            return exc.errors
        return []

    def start_run(self, doc) -> RunRecord:
        workflow = parse_workflow(doc, self.host.list_tools())
        return self.runs.start(workflow)

    def close(self) -> None:
        self.host.close()


# -- HTTP app -----------------------------------------------------------------


def _sse_frame(payload: dict, event_id: int | None = None) -> str:
    frame = ""
    if event_id is not None:
        frame += f"id: {event_id}\n"
    return frame + f"data: {json.dumps(payload)}\n\n"


def chat_event_stream(session) -> Iterator[str]:
    """Replay a chat session's events, then tail live ones until the client
    goes away. Emits comment frames while idle so proxies keep the pipe open."""
    snapshot, q = session.subscribe()
    try:
        for event in snapshot:
            yield _sse_frame(event.to_dict(), event.seq)
        while True:
            try:
                event = q.get(timeout=HEARTBEAT_SECONDS)
            except queue.Empty:
                yield ": keep-alive\n\n"
                continue
            yield _sse_frame(event.to_dict(), event.seq)
    finally:
        session.unsubscribe(q)


def create_app(orch: Orchestrator):
    from fastapi import Body, FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse, Response, StreamingResponse

    app = FastAPI(title="mcplab orchestrator", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    def bad_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"errors": [str(e) for e in exc.errors()]})

    @app.get("/servers")
    def servers():
        return {"servers": [entry.summary() for entry in orch.host.list_servers()]}

    @app.post("/servers/{alias}/refresh")
    def refresh(alias: str):
        try:
            entry = orch.host.refresh(alias)
        except Exception as exc:  # noqa: BLE001
            return JSONResponse(status_code=404, content={"error": str(exc)})
        return entry.summary()

    @app.get("/toolbox")
    def toolbox():
        return Response(content=orch.toolbox().canonical_json(), media_type="application/json")

    @app.post("/workflows/validate")
    def validate(doc: dict = Body()):
        errors = orch.validate_workflow(doc)
        return {"valid": not errors, "errors": errors}

    @app.post("/workflows/run")
    def run(doc: dict = Body()):
        try:
            record = orch.start_run(doc)
        except WorkflowValidationError as exc:
            return JSONResponse(status_code=400, content={"errors": exc.errors})
        except BusyError as exc:
            return JSONResponse(
                status_code=409, content={"error": str(exc), "busy": exc.aliases}
            )
        return {"run_id": record.run_id}

    @app.get("/runs")
    def runs():
        live = {r.run_id: r.summary() for r in orch.runs.list_runs()}
        merged = list(live.values())
        for item in orch.runs.list_persisted():
            if item["run_id"] not in live:
                merged.append(item)
        return {"runs": merged}

    @app.get("/runs/{run_id}")
    def run_snapshot(run_id: str):
        try:
            record = orch.runs.get(run_id)
        except UnknownRunError as exc:
            events = orch.runs.load_persisted_events(run_id)
            if events is None:
                return JSONResponse(status_code=404, content={"error": str(exc)})
            status = "interrupted"
            if events and events[-1].get("kind") in TERMINAL_EVENTS:
                status = (
                    "cancelled"
                    if events[-1]["kind"] == "run_cancelled"
                    else events[-1].get("output", {}).get("status", "succeeded")
                )
            return {"run_id": run_id, "status": status, "events": events, "persisted": True}
        with record.lock:
            return {
                "run_id": record.run_id,
                "status": record.status,
                "error": record.error,
                "events": [e.to_dict() for e in record.events],
            }

    @app.post("/runs/{run_id}/cancel")
    def cancel(run_id: str):
        try:
            record = orch.runs.cancel(run_id)
        except UnknownRunError as exc:
            return JSONResponse(status_code=404, content={"error": str(exc)})
        return {"run_id": run_id, "status": record.status}

    @app.get("/runs/{run_id}/events")
    def run_events(run_id: str):
        try:
            snapshot, live = orch.runs.subscribe(run_id)
        except UnknownRunError as exc:
            events = orch.runs.load_persisted_events(run_id)
            if events is None:
                return JSONResponse(status_code=404, content={"error": str(exc)})

            def replay_only() -> Iterator[str]:
                for item in events:
                    yield _sse_frame(item, item.get("seq"))

            return StreamingResponse(replay_only(), media_type="text/event-stream")

        def stream() -> Iterator[str]:
            try:
                last = None
                for event in snapshot:
                    last = event
                    yield _sse_frame(event.to_dict(), event.seq)
                if live is None:
                    return
                while last is None or last.kind not in TERMINAL_EVENTS:
                    try:
                        event = live.get(timeout=HEARTBEAT_SECONDS)
                    except queue.Empty:
                        yield ": keep-alive\n\n"
                        continue
                    last = event
                    yield _sse_frame(event.to_dict(), event.seq)
            finally:
                if live is not None:
                    orch.runs.unsubscribe(run_id, live)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.post("/chat/{session_id}")
    def chat(session_id: str, body: dict = Body()):
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            return JSONResponse(status_code=400, content={"errors": ["body needs a 'text' string"]})
        try:
            events = orch.agent.chat_turn(session_id, text)
        except PendingApprovalError as exc:
            return JSONResponse(status_code=409, content={"error": str(exc)})
        return {"session": session_id, "events": [e.to_dict() for e in events]}

    @app.get("/chat/{session_id}")
    def chat_snapshot(session_id: str):
        return orch.agent.session(session_id).snapshot()

    @app.post("/chat/{session_id}/approvals/{proposal_id}")
    def approve(session_id: str, proposal_id: str, body: dict = Body()):
        decision = body.get("decision")
        if decision not in ("approve", "reject"):
            return JSONResponse(
                status_code=400, content={"errors": ["decision must be 'approve' or 'reject'"]}
            )
        try:
            events = orch.agent.resolve(session_id, proposal_id, decision == "approve")
        except ProposalLookupError as exc:
            return JSONResponse(status_code=404, content={"error": str(exc)})
        return {"session": session_id, "events": [e.to_dict() for e in events]}

    @app.post("/chat/{session_id}/auto-approve")
    def auto_approve(session_id: str, body: dict = Body()):
        enabled = body.get("enabled")
        if not isinstance(enabled, bool):
            return JSONResponse(status_code=400, content={"errors": ["body needs boolean 'enabled'"]})
        events = orch.agent.set_auto_approve(session_id, enabled)
        session = orch.agent.session(session_id)
        return {
            "session": session_id,
            "enabled": session.auto_approve,
            "events": [e.to_dict() for e in events],
        }

    @app.get("/chat/{session_id}/events")
    def chat_events(session_id: str):
        session = orch.agent.session(session_id)
        return StreamingResponse(chat_event_stream(session), media_type="text/event-stream")

    frontend = orch.config.frontend_dir
    if frontend and Path(frontend).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend, html=True), name="frontend")

    return app


def serve(config: OrchestratorConfig) -> None:
    """Run the orchestrator until interrupted. Raises OSError if the port is taken."""
    import uvicorn

    probe = socket.socket()
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((config.host, config.port))
    finally:
        probe.close()
    orch = Orchestrator(config)
    app = create_app(orch)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    finally:
        orch.close()
