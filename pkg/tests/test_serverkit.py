"""Server-kit dispatch semantics, transport serving, and robustness."""

import json
import random
import string

import httpx
import pytest

from mcplab.fixtures import FixtureState, build_fixture_server
from mcplab.protocol import (
    INVALID_PARAMS,
    INVALID_REQUEST,
    METHOD_NOT_FOUND,
    PARSE_ERROR,
    RpcMessage,
    ToolCallResult,
    ToolDescriptor,
    frame_message,
    parse_message,
)
from mcplab.serverkit import McpServer, RegistrationError


@pytest.fixture
def server():
    return build_fixture_server()


def call(server, method, params=None, req_id=1):
    return server.dispatch(RpcMessage.request(req_id, method, params))


def test_initialize_reports_identity(server):
    reply = call(server, "initialize", {"clientInfo": {"name": "t", "version": "0"}})
    assert reply.kind == "response"
    assert reply.result["serverInfo"]["name"] == "fixture"
    assert "protocolVersion" in reply.result


def test_tools_list_shape(server):
    reply = call(server, "tools/list")
    tools = reply.result["tools"]
    names = [t["name"] for t in tools]
    assert "echo" in names and "boom" in names
    echo = next(t for t in tools if t["name"] == "echo")
    assert echo["inputSchema"]["properties"]["text"]["type"] == "string"
    assert echo["inputSchema"]["required"] == ["text"]


def test_tools_call_roundtrip(server):
    reply = call(server, "tools/call", {"name": "echo", "arguments": {"text": "hi"}})
    result = ToolCallResult.from_wire(reply.result)
    assert result.first_text() == "hi"
    assert not result.is_error


def test_unknown_method_code(server):
    reply = call(server, "resources/list")
    assert reply.kind == "error"
    assert reply.error.code == METHOD_NOT_FOUND


def test_unknown_tool_code(server):
    reply = call(server, "tools/call", {"name": "nope", "arguments": {}})
    assert reply.kind == "error"
    assert reply.error.code == INVALID_PARAMS


def test_invalid_args_code_and_violations(server):
    reply = call(server, "tools/call", {"name": "echo", "arguments": {"text": 5}})
    assert reply.kind == "error"
    assert reply.error.code == INVALID_PARAMS
    assert reply.error.data["violations"]


def test_handler_exception_becomes_error_result(server):
    reply = call(server, "tools/call", {"name": "boom", "arguments": {}})
    assert reply.kind == "response"
    result = ToolCallResult.from_wire(reply.result)
    assert result.is_error
    assert "boom" in result.first_text()
    # and the server still works afterwards
    again = call(server, "tools/call", {"name": "echo", "arguments": {"text": "ok"}})
    assert ToolCallResult.from_wire(again.result).first_text() == "ok"


def test_notification_gets_no_reply(server):
    assert server.dispatch(RpcMessage.notification("notifications/initialized")) is None
    assert server.handle_frame(b'{"jsonrpc":"2.0","method":"ping"}') is None


def test_duplicate_registration_rejected(server):
    with pytest.raises(RegistrationError):
        server.register_tool(ToolDescriptor("echo", "dup"), lambda a: ToolCallResult.text(""))


def test_zero_tool_server_lists_empty():
    empty = McpServer("bare")
    reply = empty.dispatch(RpcMessage.request(1, "tools/list"))
    assert reply.result == {"tools": []}


def test_handle_frame_parse_error(server):
    reply = parse_message(server.handle_frame(b"{garbage"))
    assert reply.kind == "error"
    assert reply.error.code == PARSE_ERROR
    assert reply.id is None


def test_handle_frame_invalid_shape(server):
    reply = parse_message(server.handle_frame(b'{"jsonrpc":"2.0","id":1}'))
    assert reply.kind == "error"
    assert reply.error.code == INVALID_REQUEST


def test_handle_frame_rejects_response_message(server):
    reply = parse_message(server.handle_frame(b'{"jsonrpc":"2.0","id":1,"result":{}}'))
    assert reply.kind == "error"
    assert reply.error.code == INVALID_REQUEST


def test_dispatch_fuzz_survives_10k_frames():
    """Random and mutated frames must always produce a well-formed reply or
    silence, never an exception, and the server must stay usable."""
    state = FixtureState()
    server = build_fixture_server(state)
    rng = random.Random(20240817)
    corpus = [
        '{"jsonrpc":"2.0","id":1,"method":"tools/list"}',
        '{"jsonrpc":"2.0","id":2,"method":"tools/call","params":{"name":"echo","arguments":{"text":"x"}}}',
        '{"jsonrpc":"2.0","id":3,"method":"initialize"}',
        '{"jsonrpc":"2.0","method":"notify"}',
    ]
    printable = string.printable
    for i in range(10000):
        roll = rng.random()
        if roll < 0.25:
            frame = "".join(rng.choice(printable) for _ in range(rng.randrange(0, 60)))
        elif roll < 0.5:
            base = list(rng.choice(corpus))
            for _ in range(rng.randrange(1, 6)):
                pos = rng.randrange(len(base))
                base[pos] = rng.choice(printable)
            frame = "".join(base)
        elif roll < 0.75:
            frame = json.dumps(
                {
                    "jsonrpc": rng.choice(["2.0", "1.0", 2, None]),
                    "id": rng.choice([1, "a", None, [], {}, True]),
                    "method": rng.choice(["tools/call", "x", "", 7, None]),
                    "params": rng.choice([{}, [], "p", 1, {"name": "tick"}, None]),
                }
            )
        else:
            frame = rng.choice(corpus)
        reply = server.handle_frame(frame.encode("utf-8", "replace"))
        if reply is not None:
            parsed = parse_message(reply)  # must itself be well-formed
            assert parsed.kind in ("response", "error")
    final = server.dispatch(
        RpcMessage.request(99, "tools/call", {"name": "echo", "arguments": {"text": "alive"}})
    )
    assert ToolCallResult.from_wire(final.result).first_text() == "alive"


def test_http_serving_roundtrip():
    server = build_fixture_server()
    httpd = server.start_http(port=0)
    port = httpd.server_address[1]
    try:
        base = f"http://127.0.0.1:{port}"
        frame = frame_message(RpcMessage.request(1, "tools/list"))
        resp = httpx.post(f"{base}/rpc", content=frame)
        assert resp.status_code == 200
        msg = parse_message(resp.content)
        assert msg.kind == "response"
        assert {t["name"] for t in msg.result["tools"]} >= {"echo", "tick"}
        # wrong path and wrong verb
        assert httpx.post(f"{base}/other", content=frame).status_code == 404
        assert httpx.get(f"{base}/rpc").status_code == 405
        # malformed body still gets a JSON-RPC error envelope
        bad = httpx.post(f"{base}/rpc", content=b"{nope")
        assert parse_message(bad.content).error.code == PARSE_ERROR
    finally:
        httpd.shutdown()
        httpd.server_close()


def test_http_port_conflict_raises():
    server = build_fixture_server()
    httpd = server.start_http(port=0)
    port = httpd.server_address[1]
    try:
        with pytest.raises(OSError):
            build_fixture_server().start_http(port=port)
    finally:
        httpd.shutdown()
        httpd.server_close()


def test_stdio_serving_eof_exits(tmp_path):
    import io
    import threading

    server = build_fixture_server()
    frames = (
        frame_message(RpcMessage.request(1, "initialize"))
        + frame_message(RpcMessage.request(2, "tools/call", {"name": "tick", "arguments": {}}))
        + b"\n"
    )
    stdin = io.BytesIO(frames)
    stdout = io.BytesIO()
    t = threading.Thread(target=server.serve_stdio, args=(stdin, stdout))
    t.start()
    t.join(timeout=5)
    assert not t.is_alive()
    lines = [l for l in stdout.getvalue().split(b"\n") if l]
    assert len(lines) == 2
    second = parse_message(lines[1])
    assert ToolCallResult.from_wire(second.result).first_text() == "tick count = 1"
