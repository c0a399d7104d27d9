"""Client transports: child-process stdio and HTTP.

Both expose the same blocking request/notify surface. The stdio transport
runs a reader thread and correlates responses to in-flight requests by id,
so callers on different threads can have requests in flight concurrently.
"""

from __future__ import annotations

import itertools
import logging
import os
import socket
import subprocess
import threading
from concurrent.futures import Future
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from urllib.parse import urlparse

from mcplab.protocol.messages import (
    ProtocolError,
    RpcMessage,
    frame_message,
    parse_message,
)

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 30000


class TransportError(Exception):
    pass


class RequestTimeout(TransportError):
    pass


@dataclass
class TransportConfig:
    kind: str  # "stdio" or "http"
    command: list[str] = field(default_factory=list)
    env: dict[str, str] = field(default_factory=dict)
    base_url: str = ""
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    def validate(self) -> None:
        if self.kind == "stdio":
            if not self.command:
                raise ValueError("stdio transport needs a command")
        elif self.kind == "http":
            parsed = urlparse(self.base_url)
            if parsed.scheme not in ("http", "https") or not parsed.hostname:
                raise ValueError(f"http transport needs a valid base_url, got {self.base_url!r}")
        else:
            raise ValueError(f"unknown transport kind {self.kind!r}")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")

    def to_dict(self) -> dict:
        if self.kind == "stdio":
            return {"kind": "stdio", "command": list(self.command), "timeout_ms": self.timeout_ms}
        return {"kind": "http", "base_url": self.base_url, "timeout_ms": self.timeout_ms}

    @classmethod
    def from_dict(cls, raw: dict) -> "TransportConfig":
        if not isinstance(raw, dict):
            raise ValueError("transport config must be an object")
        cfg = cls(
            kind=raw.get("kind", ""),
            command=list(raw.get("command") or []),
            env=dict(raw.get("env") or {}),
            base_url=raw.get("base_url", ""),
            timeout_ms=int(raw.get("timeout_ms", DEFAULT_TIMEOUT_MS)),
        )
        cfg.validate()
        return cfg


class Connection:
    """Blocking request/notify surface shared by all transports."""

    def request(self, method: str, params: dict | None = None, timeout_ms: int | None = None) -> RpcMessage:
        raise NotImplementedError

    def notify(self, method: str, params: dict | None = None) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    @property
    def alive(self) -> bool:
        raise NotImplementedError


class StdioConnection(Connection):
    """Talks to a child process over its stdin/stdout, one JSON message per line."""

    def __init__(self, config: TransportConfig):
        self._config = config
        self._ids = itertools.count(1)
        self._pending: dict[int | str, Future] = {}
        self._lock = threading.Lock()
        self._send_lock = threading.Lock()
        self._closed = False
        try:
            self._proc = subprocess.Popen(
                config.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                env={**os.environ, **config.env} if config.env else None,
            )
        except OSError as exc:
            raise TransportError(f"failed to spawn {config.command}: {exc}") from exc
        self._reader = threading.Thread(
            target=self._read_loop, name="stdio-reader", daemon=True
        )
        self._reader.start()
        self._stderr_pump = threading.Thread(
            target=self._pump_stderr, name="stdio-stderr", daemon=True
        )
        self._stderr_pump.start()

    def _read_loop(self) -> None:
        stream = self._proc.stdout
        while True:
            line = stream.readline()
            if not line:
                break
            line = line.strip()
            if not line:
                continue
            try:
                msg = parse_message(line)
            except ProtocolError as exc:
                logger.warning("dropping unparseable frame from child: %s", exc)
                continue
            if msg.kind in ("response", "error") and msg.id is not None:
                with self._lock:
                    fut = self._pending.pop(msg.id, None)
                if fut is not None:
                    fut.set_result(msg)
                else:
                    logger.warning("response for unknown request id %r", msg.id)
            else:
                logger.warning("ignoring unexpected %s from child", msg.kind)
        self._fail_pending(TransportError("child process closed its stdout"))

    def _pump_stderr(self) -> None:
        for raw in self._proc.stderr:
            logger.debug("child stderr: %s", raw.decode("utf-8", "replace").rstrip())

    def _fail_pending(self, exc: Exception) -> None:
        with self._lock:
            pending = list(self._pending.values())
            self._pending.clear()
        for fut in pending:
            if not fut.done():
                fut.set_exception(exc)

    def _send(self, message: RpcMessage) -> None:
        frame = frame_message(message)
        with self._send_lock:
            if self._closed or self._proc.poll() is not None:
                raise TransportError("child process is not running")
            try:
                self._proc.stdin.write(frame)
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"write to child failed: {exc}") from exc

    def request(self, method, params=None, timeout_ms=None) -> RpcMessage:
        req_id = next(self._ids)
        fut: Future = Future()
        with self._lock:
            self._pending[req_id] = fut
        try:
            self._send(RpcMessage.request(req_id, method, params))
        except Exception:
            with self._lock:
                self._pending.pop(req_id, None)
            raise
        timeout = (timeout_ms or self._config.timeout_ms) / 1000.0
        try:
            return fut.result(timeout=timeout)
        except FutureTimeout:
            with self._lock:
                self._pending.pop(req_id, None)
            raise RequestTimeout(f"no response to {method} within {timeout:.1f}s") from None

    def notify(self, method, params=None) -> None:
        self._send(RpcMessage.notification(method, params))

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._fail_pending(TransportError("connection closed"))

    @property
    def alive(self) -> bool:
        return not self._closed and self._proc.poll() is None


class HttpConnection(Connection):
    """POSTs one JSON-RPC message per request body to <base_url>/rpc."""

    def __init__(self, config: TransportConfig):
        import httpx

        self._config = config
        self._ids = itertools.count(1)
        self._closed = False
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout_ms / 1000.0,
        )

    def _post(self, message: RpcMessage) -> bytes | None:
        import httpx

        frame = frame_message(message)
        try:
            resp = self._client.post(
                "/rpc", content=frame, headers={"content-type": "application/json"}
            )
        except httpx.TimeoutException as exc:
            raise RequestTimeout(f"no response within {self._config.timeout_ms}ms") from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"http transport failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"server answered HTTP {resp.status_code}")
        return resp.content

    def request(self, method, params=None, timeout_ms=None) -> RpcMessage:
        req_id = next(self._ids)
        body = self._post(RpcMessage.request(req_id, method, params))
        try:
            msg = parse_message(body)
        except ProtocolError as exc:
            raise TransportError(f"unparseable response body: {exc}") from exc
        if msg.kind not in ("response", "error"):
            raise TransportError(f"expected a response, got {msg.kind}")
        if msg.id != req_id and msg.id is not None:
            raise TransportError(f"response id {msg.id!r} does not match request {req_id}")
        return msg

    def notify(self, method, params=None) -> None:
        self._post(RpcMessage.notification(method, params))

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._client.close()

    @property
    def alive(self) -> bool:
        return not self._closed


def _probe_http(config: TransportConfig) -> None:
    parsed = urlparse(config.base_url)
    port = parsed.port or (443 if parsed.scheme == "https" else 80)
    try:
        with socket.create_connection((parsed.hostname, port), timeout=5.0):
            pass
    except OSError as exc:
        raise TransportError(f"cannot reach {config.base_url}: {exc}") from exc


def open_transport(config: TransportConfig) -> Connection:
    """Open a connection per config. Raises TransportError if unreachable."""
    config.validate()
    if config.kind == "stdio":
        return StdioConnection(config)
    _probe_http(config)
    return HttpConnection(config)
