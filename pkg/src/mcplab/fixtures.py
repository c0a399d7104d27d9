"""Workbench server used by the test suite and for manual poking.

Covers the cases the rest of the stack has to survive: plain scalar tools,
a stateful counter, a handler that raises, a slow handler, and a tool whose
input schema uses an unsupported (object) parameter type.

Run standalone: python3 -m mcplab.fixtures --transport stdio|http --port N
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field

from mcplab.protocol.tooltypes import PropertySpec, ToolCallResult, ToolDescriptor
from mcplab.serverkit import McpServer, run_server_cli


@dataclass
class FixtureState:
    ticks: int = 0
    calls: list[str] = field(default_factory=list)


def build_fixture_server(state: FixtureState | None = None, name: str = "fixture") -> McpServer:
    state = state if state is not None else FixtureState()
    server = McpServer(name)

    def echo(args: dict) -> ToolCallResult:
        state.calls.append("echo")
        return ToolCallResult.text(args["text"])

    def tick(args: dict) -> ToolCallResult:
        state.calls.append("tick")
        state.ticks += 1
        return ToolCallResult.text(f"tick count = {state.ticks}")

    def count(args: dict) -> ToolCallResult:
        state.calls.append("count")
        return ToolCallResult.text(f"tick count = {state.ticks}")

    def reset_count(args: dict) -> ToolCallResult:
        state.calls.append("reset_count")
        state.ticks = 0
        return ToolCallResult.text("tick count = 0")

    def boom(args: dict) -> ToolCallResult:
        state.calls.append("boom")
        raise RuntimeError("boom")

    def slow(args: dict) -> ToolCallResult:
        state.calls.append("slow")
        time.sleep(float(args["seconds"]))
        return ToolCallResult.text(f"slept {args['seconds']}")

    def greet(args: dict) -> ToolCallResult:
        state.calls.append("greet")
        text = f"hello {args['name']}"
        if args.get("excited"):
            text += "!"
        return ToolCallResult.text(text * int(args.get("times", 1)))

    def configure(args: dict) -> ToolCallResult:
        state.calls.append("configure")
        return ToolCallResult.text("ok")

    server.register_tool(
        ToolDescriptor(
            "echo",
            "Echo the given text back.",
            [PropertySpec("text", "string", "text to echo")],
            ["text"],
        ),
        echo,
    )
    server.register_tool(
        ToolDescriptor("tick", "Increment the counter and report it."), tick
    )
    server.register_tool(
        ToolDescriptor("count", "Report the counter without changing it."), count
    )
    server.register_tool(
        ToolDescriptor("reset_count", "Reset the counter to zero."), reset_count
    )
    server.register_tool(
        ToolDescriptor("boom", "Always fails; exercises error reporting."), boom
    )
    server.register_tool(
        ToolDescriptor(
            "slow",
            "Sleep for the given number of seconds, then return.",
            [PropertySpec("seconds", "number", "how long to sleep")],
            ["seconds"],
        ),
        slow,
    )
    server.register_tool(
        ToolDescriptor(
            "greet",
            "Greet someone, optionally repeatedly.",
            [
                PropertySpec("name", "string", "who to greet"),
                PropertySpec("excited", "boolean", "add an exclamation mark"),
                PropertySpec("times", "integer", "repeat count"),
            ],
            ["name"],
        ),
        greet,
    )
    server.register_tool(
        ToolDescriptor(
            "configure",
            "Takes a nested options object; unsupported by the block toolbox.",
            [PropertySpec("options", "object", "free-form options")],
            ["options"],
        ),
        configure,
    )
    return server


def main(argv: list[str] | None = None) -> int:
    return run_server_cli(
        lambda args: build_fixture_server(),
        "Workbench MCP server with assorted test tools.",
        argv=argv,
    )


if __name__ == "__main__":
    sys.exit(main())
