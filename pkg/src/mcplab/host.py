"""Host-side server registry: connect, discover tools, route calls.

Each registered server gets its own connection and call lock, so calls to
different servers run concurrently while calls to one server are serialized.
Registration failures are recorded on the entry instead of raised, so one
bad server never takes the host down.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

from mcplab.protocol.messages import INVALID_PARAMS, RpcMessage
from mcplab.protocol.tooltypes import ToolCallResult, ToolDescriptor, validate_args
from mcplab.protocol.transport import Connection, TransportConfig, TransportError, open_transport
from mcplab.serverkit import LocalConnection, McpServer

logger = logging.getLogger(__name__)

CLIENT_INFO = {"name": "mcplab", "version": "0.1.0"}


class DuplicateAliasError(Exception):
    pass


class UnknownAliasError(Exception):
    pass


class ToolLookupError(Exception):
    pass


class ArgumentError(Exception):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class McpCallError(Exception):
    """Server answered a tools/call with a protocol-level error."""

    def __init__(self, code: int, message: str, data=None):
        super().__init__(f"[{code}] {message}")
        self.code = code
        self.data = data


@dataclass
class ServerIdentity:
    name: str
    version: str


@dataclass
class ToolRef:
    server_alias: str
    descriptor: ToolDescriptor

    @property
    def tool_name(self) -> str:
        return self.descriptor.name


@dataclass
class ServerEntry:
    alias: str
    transport: TransportConfig | None
    status: str = "pending"  # pending | ready | failed
    identity: ServerIdentity | None = None
    error: str | None = None
    tools: list[ToolDescriptor] = field(default_factory=list)
    connection: Connection | None = None
    call_lock: threading.Lock = field(default_factory=threading.Lock)

    def summary(self) -> dict:
        return {
            "alias": self.alias,
            "status": self.status,
            "identity": (
                {"name": self.identity.name, "version": self.identity.version}
                if self.identity
                else None
            ),
            "error": self.error,
            "tools": [t.name for t in self.tools],
            "transport": self.transport.to_dict() if self.transport else {"kind": "local"},
        }


class Host:
    def __init__(self):
        self._entries: dict[str, ServerEntry] = {}
        self._lock = threading.RLock()

    # -- registration -----------------------------------------------------

    def register_server(self, alias: str, transport: TransportConfig) -> ServerEntry:
        """Connect, handshake, and discover tools. Failures land on the entry."""
        with self._lock:
            if alias in self._entries:
                raise DuplicateAliasError(f"alias {alias!r} already registered")
            entry = ServerEntry(alias=alias, transport=transport)
            self._entries[alias] = entry
        self._connect(entry)
        return entry

    def attach_server(self, alias: str, server: McpServer) -> ServerEntry:
        """Register an in-process server. Same discovery path, no transport."""
        with self._lock:
            if alias in self._entries:
                raise DuplicateAliasError(f"alias {alias!r} already registered")
            entry = ServerEntry(alias=alias, transport=None)
            self._entries[alias] = entry
        self._handshake(entry, LocalConnection(server))
        return entry

    def _connect(self, entry: ServerEntry) -> None:
        try:
            connection = open_transport(entry.transport)
        except (TransportError, ValueError) as exc:
            entry.status = "failed"
            entry.error = str(exc)
            logger.warning("server %s failed to connect: %s", entry.alias, exc)
            return
        self._handshake(entry, connection)

    def _handshake(self, entry: ServerEntry, connection: Connection) -> None:
        try:
            init = connection.request("initialize", {"clientInfo": CLIENT_INFO})
            if init.kind == "error":
                raise TransportError(f"initialize rejected: {init.error.message}")
            info = (init.result or {}).get("serverInfo") or {}
            identity = ServerIdentity(
                name=str(info.get("name") or entry.alias),
                version=str(info.get("version") or "unknown"),
            )
            listing = connection.request("tools/list")
            if listing.kind == "error":
                raise TransportError(f"tools/list rejected: {listing.error.message}")
            raw_tools = (listing.result or {}).get("tools")
            if not isinstance(raw_tools, list):
                raise TransportError("tools/list result lacks a tools array")
            tools = [ToolDescriptor.from_wire(t) for t in raw_tools]
        except Exception as exc:  # noqa: BLE001 - record, do not propagate
            connection.close()
            entry.status = "failed"
            entry.error = str(exc)
            entry.connection = None
            logger.warning("server %s failed handshake: %s", entry.alias, exc)
            return
        entry.connection = connection
        entry.identity = identity
        entry.tools = tools
        entry.status = "ready"
        entry.error = None
        logger.info(
            "server %s ready: %s %s, %d tools",
            entry.alias,
            identity.name,
            identity.version,
            len(tools),
        )

    def refresh(self, alias: str) -> ServerEntry:
        """Reconnect and re-discover. Old connection is closed either way."""
        entry = self._get(alias)
        old = entry.connection
        entry.connection = None
        entry.status = "pending"
        if old is not None:
            old.close()
        if entry.transport is None:
            entry.status = "failed"
            entry.error = "local server cannot be refreshed"
            return entry
        self._connect(entry)
        return entry

    def close(self) -> None:
        with self._lock:
            entries = list(self._entries.values())
        for entry in entries:
            if entry.connection is not None:
                entry.connection.close()
                entry.connection = None
            if entry.status == "ready":
                entry.status = "failed"
                entry.error = "host closed"

    # -- lookup -----------------------------------------------------------

    def _get(self, alias: str) -> ServerEntry:
        with self._lock:
            entry = self._entries.get(alias)
        if entry is None:
            raise UnknownAliasError(f"no server registered as {alias!r}")
        return entry

    def list_servers(self) -> list[ServerEntry]:
        with self._lock:
            return list(self._entries.values())

    def list_tools(self, alias: str | None = None) -> list[ToolRef]:
        if alias is not None:
            entries = [self._get(alias)]
        else:
            entries = self.list_servers()
        refs = []
        for entry in entries:
            if entry.status != "ready":
                continue
            for tool in entry.tools:
                refs.append(ToolRef(entry.alias, tool))
        return refs

    def find_tool(self, alias: str, tool_name: str) -> ToolRef:
        entry = self._get(alias)
        for tool in entry.tools:
            if tool.name == tool_name:
                return ToolRef(alias, tool)
        raise ToolLookupError(f"server {alias!r} has no tool {tool_name!r}")

    # -- calls ------------------------------------------------------------

    def call_tool(
        self,
        alias: str,
        tool_name: str,
        args: dict | None = None,
        timeout_ms: int | None = None,
    ) -> ToolCallResult:
        args = args or {}
        entry = self._get(alias)
        if entry.status != "ready" or entry.connection is None:
            raise TransportError(
                f"server {alias!r} is not ready ({entry.status}: {entry.error})"
            )
        ref = self.find_tool(alias, tool_name)
        violations = validate_args(ref.descriptor, args)
        if violations:
            raise ArgumentError(violations)
        with entry.call_lock:
            reply = entry.connection.request(
                "tools/call", {"name": tool_name, "arguments": args}, timeout_ms
            )
        return self._unpack_call_reply(reply)

    @staticmethod
    def _unpack_call_reply(reply: RpcMessage) -> ToolCallResult:
        if reply.kind == "error":
            err = reply.error
            if err.code == INVALID_PARAMS and isinstance(err.data, dict):
                raise ArgumentError(list(err.data.get("violations") or [err.message]))
            raise McpCallError(err.code, err.message, err.data)
        try:
            return ToolCallResult.from_wire(reply.result)
        except ValueError as exc:
            raise McpCallError(0, f"malformed tool result: {exc}") from exc
