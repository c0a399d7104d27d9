"""Minimal MCP server kit.

Handles initialize, tools/list, and tools/call over stdio or HTTP. Tool
handlers are plain callables taking the argument dict and returning a
ToolCallResult; exceptions inside a handler become isError results, never
protocol errors, so a buggy tool cannot kill the connection.
"""

from __future__ import annotations

import argparse
import logging
import sys
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

from mcplab.protocol.messages import (
    INVALID_PARAMS,
    INVALID_REQUEST,
    METHOD_NOT_FOUND,
    ProtocolError,
    RpcMessage,
    frame_message,
    parse_message,
)
from mcplab.protocol.tooltypes import ToolCallResult, ToolDescriptor, validate_args
from mcplab.protocol.transport import Connection

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "2025-06-18"

ToolHandler = Callable[[dict], ToolCallResult]


class RegistrationError(Exception):
    pass


@dataclass
class _Tool:
    descriptor: ToolDescriptor
    handler: ToolHandler


class McpServer:
    def __init__(self, name: str, version: str = "0.1.0"):
        self.name = name
        self.version = version
        self._tools: dict[str, _Tool] = {}
        self._dispatch_lock = threading.Lock()

    def register_tool(self, descriptor: ToolDescriptor, handler: ToolHandler) -> None:
        if descriptor.name in self._tools:
            raise RegistrationError(f"tool {descriptor.name!r} already registered")
        self._tools[descriptor.name] = _Tool(descriptor, handler)

    def descriptors(self) -> list[ToolDescriptor]:
        return [t.descriptor for t in self._tools.values()]

    # -- dispatch ---------------------------------------------------------

    def dispatch(self, message: RpcMessage) -> RpcMessage | None:
        """Answer one request. Notifications return None."""
        if message.kind == "notification":
            return None
        if message.kind != "request":
            return RpcMessage.error_response(
                message.id, INVALID_REQUEST, "server accepts only requests"
            )
        method = message.method
        if method == "initialize":
            return RpcMessage.response(
                message.id,
                {
                    "protocolVersion": PROTOCOL_VERSION,
                    "serverInfo": {"name": self.name, "version": self.version},
                    "capabilities": {"tools": {}},
                },
            )
        if method == "tools/list":
            return RpcMessage.response(
                message.id, {"tools": [t.descriptor.to_wire() for t in self._tools.values()]}
            )
        if method == "tools/call":
            return self._dispatch_call(message)
        return RpcMessage.error_response(
            message.id, METHOD_NOT_FOUND, f"unknown method {method!r}"
        )

    def _dispatch_call(self, message: RpcMessage) -> RpcMessage:
        params = message.params or {}
        name = params.get("name")
        args = params.get("arguments") or {}
        if not isinstance(name, str):
            return RpcMessage.error_response(
                message.id, INVALID_PARAMS, "params.name must be a string"
            )
        tool = self._tools.get(name)
        if tool is None:
            return RpcMessage.error_response(
                message.id, INVALID_PARAMS, f"unknown tool {name!r}"
            )
        if not isinstance(args, dict):
            return RpcMessage.error_response(
                message.id, INVALID_PARAMS, "params.arguments must be an object"
            )
        violations = validate_args(tool.descriptor, args)
        if violations:
            return RpcMessage.error_response(
                message.id,
                INVALID_PARAMS,
                f"invalid arguments for {name}",
                data={"violations": violations},
            )
        try:
            result = tool.handler(args)
        except Exception as exc:  # noqa: BLE001 - tool bugs must not kill the wire
            logger.exception("tool %s raised", name)
            result = ToolCallResult.error(f"{type(exc).__name__}: {exc}")
        if not isinstance(result, ToolCallResult):
            result = ToolCallResult.error(
                f"tool {name} returned {type(result).__name__}, expected ToolCallResult"
            )
        return RpcMessage.response(message.id, result.to_wire())

    def handle_frame(self, raw: bytes | str) -> bytes | None:
        """Parse, dispatch, and encode one frame. Never raises."""
        try:
            message = parse_message(raw)
        except ProtocolError as exc:
            return frame_message(
                RpcMessage.error_response(None, exc.code, str(exc))
            )
        with self._dispatch_lock:
            reply = self.dispatch(message)
        if reply is None:
            return None
        return frame_message(reply)

    # -- serving ----------------------------------------------------------

    def serve_stdio(self, stdin=None, stdout=None) -> None:
        """Read frames from stdin until EOF, answering on stdout."""
        stdin = stdin if stdin is not None else sys.stdin.buffer
        stdout = stdout if stdout is not None else sys.stdout.buffer
        logger.info("%s serving on stdio", self.name)
        while True:
            line = stdin.readline()
            if not line:
                break
            if not line.strip():
                continue
            reply = self.handle_frame(line)
            if reply is not None:
                stdout.write(reply)
                stdout.flush()
        logger.info("%s: stdin closed, exiting", self.name)

    def start_http(self, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
        """Bind and start serving in a background thread. Raises OSError if the
        port is taken. Caller shuts down via server.shutdown()."""
        server = _build_http_server(self, host, port)
        thread = threading.Thread(
            target=server.serve_forever, name=f"{self.name}-http", daemon=True
        )
        thread.start()
        return server

    def serve_http(self, host: str = "127.0.0.1", port: int = 8900) -> None:
        server = _build_http_server(self, host, port)
        logger.info("%s serving on http://%s:%d/rpc", self.name, host, port)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()


def _build_http_server(mcp: McpServer, host: str, port: int) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def do_POST(self):  # noqa: N802 - stdlib casing
            if self.path.rstrip("/") != "/rpc":
                self._answer(404, b'{"error":"not found"}')
                return
            length = int(self.headers.get("content-length") or 0)
            body = self.rfile.read(length) if length else b""
            reply = mcp.handle_frame(body)
            if reply is None:
                self._answer(202, b"")
            else:
                self._answer(200, reply)

        def do_GET(self):  # noqa: N802
            self._answer(405, b'{"error":"POST one JSON-RPC message to /rpc"}')

        def _answer(self, status: int, payload: bytes):
            self.send_response(status)
            self.send_header("content-type", "application/json")
            self.send_header("content-length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, fmt, *args):
            logger.debug("http: " + fmt, *args)

    return ThreadingHTTPServer((host, port), Handler)


class LocalConnection(Connection):
    """In-process connection to a McpServer, for embedding and tests."""

    def __init__(self, server: McpServer):
        self._server = server
        self._ids = iter(range(1, 1 << 62))
        self._lock = threading.Lock()
        self._closed = False

    def request(self, method, params=None, timeout_ms=None) -> RpcMessage:
        with self._lock:
            req_id = next(self._ids)
        reply = self._server.dispatch(RpcMessage.request(req_id, method, params))
        assert reply is not None
        return reply

    def notify(self, method, params=None) -> None:
        self._server.dispatch(RpcMessage.notification(method, params))

    def close(self) -> None:
        self._closed = True

    @property
    def alive(self) -> bool:
        return not self._closed


def run_server_cli(
    build: Callable[[argparse.Namespace], McpServer],
    description: str,
    add_args: Callable[[argparse.ArgumentParser], None] | None = None,
    argv: list[str] | None = None,
) -> int:
    """Shared main() for the bundled servers: --transport stdio|http --port N."""
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--transport", choices=("stdio", "http"), default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8900)
    if add_args:
        add_args(parser)
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    server = build(args)
    if args.transport == "stdio":
        server.serve_stdio()
    else:
        server.serve_http(args.host, args.port)
    return 0
