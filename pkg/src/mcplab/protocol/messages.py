"""JSON-RPC 2.0 message model with newline-delimited framing.

Only the subset needed for MCP tool traffic: requests, notifications, and
responses. Batch messages are not supported. One JSON object per line; the
encoder never emits interior newlines, so readline framing is safe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

JSONRPC_VERSION = "2.0"

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603


class ProtocolError(Exception):
    """Malformed frame. `code` is the JSON-RPC error code to answer with."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RpcError:
    code: int
    message: str
    data: Any = None

    def to_wire(self) -> dict:
        wire: dict = {"code": self.code, "message": self.message}
        if self.data is not None:
            wire["data"] = self.data
        return wire


@dataclass
class RpcMessage:
    """One decoded message. `kind` is request, notification, response or error."""

    kind: str
    id: int | str | None = None
    method: str | None = None
    params: dict | None = None
    result: Any = None
    error: RpcError | None = None

    @classmethod
    def request(cls, id: int | str, method: str, params: dict | None = None) -> "RpcMessage":
        return cls(kind="request", id=id, method=method, params=params)

    @classmethod
    def notification(cls, method: str, params: dict | None = None) -> "RpcMessage":
        return cls(kind="notification", method=method, params=params)

    @classmethod
    def response(cls, id: int | str, result: Any) -> "RpcMessage":
        return cls(kind="response", id=id, result=result)

    @classmethod
    def error_response(
        cls, id: int | str | None, code: int, message: str, data: Any = None
    ) -> "RpcMessage":
        return cls(kind="error", id=id, error=RpcError(code, message, data))

    def to_wire(self) -> dict:
        wire: dict = {"jsonrpc": JSONRPC_VERSION}
        if self.kind == "request":
            wire["id"] = self.id
            wire["method"] = self.method
            if self.params is not None:
                wire["params"] = self.params
        elif self.kind == "notification":
            wire["method"] = self.method
            if self.params is not None:
                wire["params"] = self.params
        elif self.kind == "response":
            wire["id"] = self.id
            wire["result"] = self.result
        elif self.kind == "error":
            wire["id"] = self.id
            wire["error"] = self.error.to_wire() if self.error else None
        else:
            raise ProtocolError(INTERNAL_ERROR, f"unknown message kind {self.kind!r}")
        return wire


def frame_message(message: RpcMessage) -> bytes:
    """Encode one message as a single line, trailing newline included."""
    wire = message.to_wire()
    try:
        text = json.dumps(wire, separators=(",", ":"))
    except (TypeError, ValueError) as exc:
        raise ProtocolError(INTERNAL_ERROR, f"unencodable message: {exc}") from exc
    return text.encode("utf-8") + b"\n"


def parse_message(line: bytes | str) -> RpcMessage:
    """Decode one frame. Raises ProtocolError with the matching error code."""
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(PARSE_ERROR, f"invalid utf-8: {exc}") from exc
    try:
        wire = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(PARSE_ERROR, f"invalid JSON: {exc}") from exc
    if not isinstance(wire, dict):
        raise ProtocolError(INVALID_REQUEST, "message must be a JSON object")
    if wire.get("jsonrpc") != JSONRPC_VERSION:
        raise ProtocolError(INVALID_REQUEST, "missing or wrong jsonrpc version")

    msg_id = wire.get("id")
    if msg_id is not None and not isinstance(msg_id, (int, str)):
        raise ProtocolError(INVALID_REQUEST, "id must be a string or integer")
    if isinstance(msg_id, bool):
        raise ProtocolError(INVALID_REQUEST, "id must be a string or integer")

    if "method" in wire:
        method = wire["method"]
        if not isinstance(method, str) or not method:
            raise ProtocolError(INVALID_REQUEST, "method must be a non-empty string")
        params = wire.get("params")
        if params is not None and not isinstance(params, dict):
            raise ProtocolError(INVALID_REQUEST, "params must be an object")
        if "id" in wire and msg_id is not None:
            return RpcMessage.request(msg_id, method, params)
        return RpcMessage.notification(method, params)

    has_result = "result" in wire
    has_error = "error" in wire
    if has_result == has_error:
        raise ProtocolError(
            INVALID_REQUEST, "need exactly one of method, result, or error"
        )
    if "id" not in wire:
        raise ProtocolError(INVALID_REQUEST, "response without id")
    if has_result:
        return RpcMessage.response(msg_id, wire["result"])
    err = wire["error"]
    if (
        not isinstance(err, dict)
        or not isinstance(err.get("code"), int)
        or isinstance(err.get("code"), bool)
        or not isinstance(err.get("message"), str)
    ):
        raise ProtocolError(INVALID_REQUEST, "error must carry int code and str message")
    return RpcMessage(
        kind="error",
        id=msg_id,
        error=RpcError(err["code"], err["message"], err.get("data")),
    )
