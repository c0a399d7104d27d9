"""Chat sessions with approval-gated tool calls.

A language-model backend produces replies that either say something or ask
to call one tool. Every requested call becomes a proposal; with auto-approve
off, the session parks on the proposal until the user approves or rejects
it. Auto-approve executes proposals immediately but stops after
AUTO_APPROVE_LIMIT consecutive calls in one user turn, so a looping backend
cannot run the lab unattended forever. Backends that request unknown tools
or invalid arguments get the violation reported back; nothing invalid is
ever executed.

The bundled ScriptedBackend replays a fixed reply list (tests, demos). The
ChatApiBackend posts to an OpenAI-style chat completions endpoint configured
through MCPLAB_CHAT_URL / MCPLAB_CHAT_MODEL / MCPLAB_CHAT_KEY.
"""

from __future__ import annotations

import itertools
import json
import logging
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Any

from mcplab.host import Host
from mcplab.protocol.tooltypes import ToolCallResult, validate_args

logger = logging.getLogger(__name__)

AUTO_APPROVE_LIMIT = 25


class PendingApprovalError(Exception):
    pass


class ProposalLookupError(Exception):
    pass


@dataclass
class ChatMessage:
    role: str  # user | assistant | tool | system
    text: str


@dataclass
class ToolCallRequest:
    server: str
    tool: str
    args: dict


@dataclass
class BackendReply:
    text: str | None = None
    tool_call: ToolCallRequest | None = None


@dataclass
class ToolCallProposal:
    id: str
    server: str
    tool: str
    args: dict
    status: str = "pending"  # pending | approved | rejected | executed | failed
    result: ToolCallResult | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "server": self.server,
            "tool": self.tool,
            "args": self.args,
            "status": self.status,
            "result": self.result.to_wire() if self.result else None,
            "error": self.error,
        }


@dataclass
class ChatEvent:
    seq: int
    kind: str
    payload: dict
    ts: float

    def to_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload, "ts": self.ts}


class ScriptedBackend:
    """Replays a fixed list of replies; used by tests and offline demos."""

    def __init__(self, replies: list[BackendReply]):
        self._replies = list(replies)
        self._cursor = 0

    def reply(self, transcript: list[ChatMessage], tools) -> BackendReply:
        if self._cursor >= len(self._replies):
            return BackendReply(text="(script exhausted)")
        reply = self._replies[self._cursor]
        self._cursor += 1
        return reply


class ChatApiBackend:
    """OpenAI-style chat completions client. Tool names are namespaced as
    '<alias>__<tool>' since most APIs reject dots in function names."""

    def __init__(self, url: str, model: str, api_key: str = ""):
        self.url = url
        self.model = model
        self.api_key = api_key

    @classmethod
    def from_env(cls, env: dict) -> "ChatApiBackend | None":
        url = env.get("MCPLAB_CHAT_URL")
        model = env.get("MCPLAB_CHAT_MODEL")
        if not url or not model:
            return None
        return cls(url, model, env.get("MCPLAB_CHAT_KEY", ""))

    def reply(self, transcript: list[ChatMessage], tools) -> BackendReply:
        import httpx

        role_map = {"user": "user", "assistant": "assistant", "tool": "user", "system": "system"}
        messages = [
            {"role": role_map.get(m.role, "user"), "content": m.text} for m in transcript
        ]
        payload = {
            "model": self.model,
            "messages": messages,
            "tools": [
                {
                    "type": "function",
                    "function": {
                        "name": f"{ref.server_alias}__{ref.tool_name}",
                        "description": ref.descriptor.description,
                        "parameters": ref.descriptor.to_wire()["inputSchema"],
                    },
                }
                for ref in tools
            ],
        }
        headers = {"content-type": "application/json"}
        if self.api_key:
            headers["authorization"] = f"Bearer {self.api_key}"
        response = httpx.post(self.url, json=payload, headers=headers, timeout=120.0)
        response.raise_for_status()
        message = response.json()["choices"][0]["message"]
        calls = message.get("tool_calls") or []
        if calls:
            fn = calls[0]["function"]
            alias, _, tool = fn["name"].partition("__")
            args = json.loads(fn.get("arguments") or "{}")
            return BackendReply(text=message.get("content"), tool_call=ToolCallRequest(alias, tool, args))
        return BackendReply(text=message.get("content") or "")


class ChatSession:
    def __init__(self, session_id: str):
        self.id = session_id
        self.transcript: list[ChatMessage] = []
        self.events: list[ChatEvent] = []
        self.pending: ToolCallProposal | None = None
        self.auto_approve = False
        self.lock = threading.RLock()
        self.subscribers: list[queue.Queue] = []
        self._seq = itertools.count()

    def emit(self, kind: str, payload: dict) -> ChatEvent:
        with self.lock:
            event = ChatEvent(seq=next(self._seq), kind=kind, payload=payload, ts=time.time())
            self.events.append(event)
            for q in self.subscribers:
                q.put(event)
        return event

    def subscribe(self) -> tuple[list[ChatEvent], queue.Queue]:
        with self.lock:
            snapshot = list(self.events)
            q: queue.Queue = queue.Queue()
            self.subscribers.append(q)
        return snapshot, q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "session": self.id,
                "auto_approve": self.auto_approve,
                "pending": self.pending.to_dict() if self.pending else None,
                "transcript": [{"role": m.role, "text": m.text} for m in self.transcript],
                "events": [e.to_dict() for e in self.events],
            }


class AgentGateway:
    def __init__(self, host: Host, backend, auto_approve_limit: int = AUTO_APPROVE_LIMIT):
        self._host = host
        self._backend = backend
        self._limit = auto_approve_limit
        self._sessions: dict[str, ChatSession] = {}
        self._lock = threading.Lock()

    def session(self, session_id: str) -> ChatSession:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                session = ChatSession(session_id)
                self._sessions[session_id] = session
            return session

    def sessions(self) -> list[ChatSession]:
        with self._lock:
            return list(self._sessions.values())

    def chat_turn(self, session_id: str, text: str) -> list[ChatEvent]:
        """Feed one user message and drive the backend until it stops asking
        for tools or a proposal needs manual approval."""
        session = self.session(session_id)
        with session.lock:
            if session.pending is not None:
                raise PendingApprovalError(
                    f"proposal {session.pending.id} awaits approval"
                )
            start = len(session.events)
            session.transcript.append(ChatMessage("user", text))
            session.emit("user_message", {"text": text})
            self._drive(session, auto_budget=self._limit)
            return session.events[start:]

    def resolve(self, session_id: str, proposal_id: str, approve: bool) -> list[ChatEvent]:
        session = self.session(session_id)
        with session.lock:
            proposal = session.pending
            if proposal is None or proposal.id != proposal_id:
                raise ProposalLookupError(f"no pending proposal {proposal_id!r}")
            start = len(session.events)
            session.pending = None
            if approve:
                self._execute(session, proposal)
            else:
                proposal.status = "rejected"
                session.emit("proposal_update", {"proposal": proposal.to_dict()})
                session.transcript.append(
                    ChatMessage(
                        "system",
                        f"user rejected the call to {proposal.server}.{proposal.tool}",
                    )
                )
            # hand control back to the backend either way
            self._drive(session, auto_budget=self._limit)
            return session.events[start:]

    def set_auto_approve(self, session_id: str, enabled: bool) -> list[ChatEvent]:
        session = self.session(session_id)
        with session.lock:
            start = len(session.events)
            session.auto_approve = bool(enabled)
            session.emit("auto_approve", {"enabled": session.auto_approve})
            # a parked proposal runs immediately once auto-approve turns on
            if session.auto_approve and session.pending is not None:
                proposal = session.pending
                session.pending = None
                self._execute(session, proposal)
                self._drive(session, auto_budget=self._limit)
            return session.events[start:]

    # -- internals ---------------------------------------------------------

    def _drive(self, session: ChatSession, auto_budget: int) -> None:
        auto_used = 0
        while True:
            try:
                reply = self._backend.reply(list(session.transcript), self._host.list_tools())
            except Exception as exc:  # noqa: BLE001 - backend outage is a chat event
                logger.exception("backend failed")
                session.emit("error", {"message": f"backend failed: {exc}"})
                return
            if reply is None:
                return
            if reply.text:
                session.transcript.append(ChatMessage("assistant", reply.text))
                session.emit("assistant_message", {"text": reply.text})
            if reply.tool_call is None:
                return
            request = reply.tool_call
            violations = self._vet(request)
            if violations:
                message = (
                    f"backend requested {request.server}.{request.tool} but it is "
                    f"invalid: {'; '.join(violations)}"
                )
                session.emit("error", {"message": message})
                session.transcript.append(ChatMessage("system", message))
                return
            proposal = ToolCallProposal(
                id=uuid.uuid4().hex[:12],
                server=request.server,
                tool=request.tool,
                args=request.args,
            )
            session.emit("proposal", {"proposal": proposal.to_dict()})
            if session.auto_approve and auto_used < auto_budget:
                auto_used += 1
                self._execute(session, proposal)
                continue
            if session.auto_approve:
                session.emit(
                    "notice",
                    {
                        "message": (
                            f"auto-approve paused after {auto_used} calls this turn; "
                            "approve manually to continue"
                        )
                    },
                )
            session.pending = proposal
            return

    def _vet(self, request: ToolCallRequest) -> list[str]:
        if not isinstance(request.args, dict):
            return ["arguments must be an object"]
        try:
            ref = self._host.find_tool(request.server, request.tool)
        except Exception as exc:  # noqa: BLE001
            return [str(exc)]
        return validate_args(ref.descriptor, request.args)

    def _execute(self, session: ChatSession, proposal: ToolCallProposal) -> None:
        proposal.status = "approved"
        session.emit("proposal_update", {"proposal": proposal.to_dict()})
        try:
            result = self._host.call_tool(proposal.server, proposal.tool, proposal.args)
        except Exception as exc:  # noqa: BLE001 - transport faults become failed proposals
            proposal.status = "failed"
            proposal.error = str(exc)
            session.emit("proposal_update", {"proposal": proposal.to_dict()})
            session.transcript.append(
                ChatMessage("tool", f"{proposal.server}.{proposal.tool} failed: {exc}")
            )
            return
        proposal.status = "executed"
        proposal.result = result
        session.emit("proposal_update", {"proposal": proposal.to_dict()})
        text = result.first_text()
        if text is None:
            text = "[no text content]"
        if result.is_error:
            text = f"[tool error] {text}"
        session.transcript.append(ChatMessage("tool", text))
