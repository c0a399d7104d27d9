"""Block workflow model: parsing, validation, and the interpreter.

A workflow is a JSON document: {"version": 1, "blocks": [...]}. Statement
blocks are tool_call, repeat, if, set_var, and log; expression blocks are
literal, var_ref, binop, and tool_call (a call used for its text result).
Execution emits a strictly ordered event stream; every started block gets
exactly one finished or failed event, so nesting is always balanced and a
UI can mirror execution by matching starts to ends.

Values are numbers, strings, and booleans. Strings flowing into numeric
slots are coerced by extracting a trailing numeric literal ("count = 7" is
7); anything else fails the block. Failures unwind through the enclosing
blocks and fail the run; there is no retry.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from mcplab.host import Host, ToolRef

logger = logging.getLogger(__name__)

STATEMENT_KINDS = ("tool_call", "repeat", "if", "set_var", "log")
EXPRESSION_KINDS = ("literal", "var_ref", "binop", "tool_call")
BINARY_OPS = ("+", "-", "*", "/", "<", ">", "==")
UNARY_OPS = ("neg",)

_TRAILING_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?\s*$")


class WorkflowValidationError(Exception):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class Block:
    id: str
    kind: str


@dataclass
class LiteralBlock(Block):
    value: float | int | str = 0


@dataclass
class VarRefBlock(Block):
    name: str = ""


@dataclass
class BinOpBlock(Block):
    op: str = "+"
    left: Block | None = None
    right: Block | None = None


@dataclass
class ToolCallBlock(Block):
    server: str = ""
    tool: str = ""
    args: dict[str, Block] = field(default_factory=dict)


@dataclass
class RepeatBlock(Block):
    count: Block | None = None
    body: list[Block] = field(default_factory=list)


@dataclass
class IfBlock(Block):
    cond: Block | None = None
    then: list[Block] = field(default_factory=list)
    orelse: list[Block] = field(default_factory=list)


@dataclass
class SetVarBlock(Block):
    name: str = ""
    value: Block | None = None


@dataclass
class LogBlock(Block):
    message: Block | None = None


@dataclass
class Workflow:
    version: int
    blocks: list[Block]


# -- parsing and validation ---------------------------------------------------


class _Parser:
    def __init__(self, catalog: Iterable[ToolRef] | None):
        self.errors: list[str] = []
        self.ids: set[str] = set()
        self.tools = (
            {(ref.server_alias, ref.tool_name): ref.descriptor for ref in catalog}
            if catalog is not None
            else None
        )

    def fail(self, where: str, message: str) -> None:
        self.errors.append(f"{where}: {message}")

    def parse_doc(self, doc: Any) -> Workflow:
        if not isinstance(doc, dict):
            self.fail("document", "must be a JSON object")
            return Workflow(1, [])
        version = doc.get("version")
        if not isinstance(version, int) or isinstance(version, bool):
            self.fail("document", "version must be an integer")
            version = 1
        elif version != 1:
            self.fail("document", f"unsupported version {version}")
        raw_blocks = doc.get("blocks")
        if not isinstance(raw_blocks, list):
            self.fail("document", "blocks must be an array")
            return Workflow(version, [])
        return Workflow(version, self.parse_body(raw_blocks, "blocks"))

    def parse_body(self, raw: Any, where: str) -> list[Block]:
        if not isinstance(raw, list):
            self.fail(where, "must be an array of blocks")
            return []
        return [self.parse_block(item, where, "statement") for item in raw]

    def parse_block(self, raw: Any, where: str, position: str) -> Block:
        placeholder = LiteralBlock(id="?", kind="literal", value=0)
        if not isinstance(raw, dict):
            self.fail(where, "block must be an object")
            return placeholder
        block_id = raw.get("id")
        if not isinstance(block_id, str) or not block_id:
            self.fail(where, "block needs a non-empty string id")
            block_id = "?"
        elif block_id in self.ids:
            self.fail(f"block {block_id!r}", "duplicate id")
        else:
            self.ids.add(block_id)
        kind = raw.get("kind")
        allowed = STATEMENT_KINDS if position == "statement" else EXPRESSION_KINDS
        if kind not in allowed:
            self.fail(
                f"block {block_id!r}",
                f"kind {kind!r} not allowed as {position} "
                f"(expected one of {', '.join(allowed)})",
            )
            return placeholder
        handler = getattr(self, f"_parse_{kind}")
        return handler(raw, block_id)

    def _expr(self, raw: Any, where: str) -> Block:
        return self.parse_block(raw, where, "expression")

    def _parse_literal(self, raw: dict, block_id: str) -> Block:
        value = raw.get("value")
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            self.fail(f"block {block_id!r}", "literal value must be a number or string")
            value = 0
        return LiteralBlock(id=block_id, kind="literal", value=value)

    def _parse_var_ref(self, raw: dict, block_id: str) -> Block:
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            self.fail(f"block {block_id!r}", "var_ref needs a non-empty name")
            name = "?"
        return VarRefBlock(id=block_id, kind="var_ref", name=name)

    def _parse_binop(self, raw: dict, block_id: str) -> Block:
        op = raw.get("op")
        where = f"block {block_id!r}"
        if op in UNARY_OPS:
            if raw.get("right") is not None:
                self.fail(where, f"op {op!r} takes one operand")
            left = self._expr(raw.get("left"), where) if raw.get("left") is not None else None
            if left is None:
                self.fail(where, "missing operand")
            return BinOpBlock(id=block_id, kind="binop", op=op, left=left)
        if op not in BINARY_OPS:
            self.fail(where, f"unknown op {op!r}")
            op = "+"
        left = self._expr(raw.get("left"), where) if raw.get("left") is not None else None
        right = self._expr(raw.get("right"), where) if raw.get("right") is not None else None
        if left is None or right is None:
            self.fail(where, f"op {op!r} needs left and right operands")
        return BinOpBlock(id=block_id, kind="binop", op=op, left=left, right=right)

    def _parse_tool_call(self, raw: dict, block_id: str) -> Block:
        where = f"block {block_id!r}"
        server = raw.get("server")
        tool = raw.get("tool")
        if not isinstance(server, str) or not server:
            self.fail(where, "tool_call needs a server alias")
            server = "?"
        if not isinstance(tool, str) or not tool:
            self.fail(where, "tool_call needs a tool name")
            tool = "?"
        raw_args = raw.get("args") or {}
        if not isinstance(raw_args, dict):
            self.fail(where, "args must be an object")
            raw_args = {}
        args = {
            name: self._expr(expr, f"{where} arg {name!r}")
            for name, expr in raw_args.items()
        }
        if self.tools is not None:
            descriptor = self.tools.get((server, tool))
            if descriptor is None:
                self.fail(where, f"no tool {tool!r} on server {server!r}")
            else:
                props = descriptor.property_map()
                for req in descriptor.required:
                    if req not in args:
                        self.fail(where, f"missing required arg {req!r}")
                for name, expr in args.items():
                    spec = props.get(name)
                    if spec is None:
                        self.fail(where, f"tool {tool!r} has no arg {name!r}")
                        continue
                    self._check_literal_arg(where, name, spec.type, expr)
        return ToolCallBlock(id=block_id, kind="tool_call", server=server, tool=tool, args=args)

    def _check_literal_arg(self, where: str, name: str, ptype: str, expr: Block) -> None:
        if not isinstance(expr, LiteralBlock):
            return
        value = expr.value
        if ptype in ("number", "integer") and isinstance(value, str):
            if not _TRAILING_NUMBER.search(value):
                self.fail(where, f"arg {name!r} needs a number, literal {value!r} has none")
        elif ptype == "string" and not isinstance(value, str):
            self.fail(where, f"arg {name!r} needs a string, got literal {value!r}")
        elif ptype == "boolean":
            self.fail(where, f"arg {name!r} is boolean; literals cannot express booleans")
        elif ptype == "integer" and isinstance(value, float) and not value.is_integer():
            self.fail(where, f"arg {name!r} needs an integer, got {value!r}")

    def _parse_repeat(self, raw: dict, block_id: str) -> Block:
        where = f"block {block_id!r}"
        count_raw = raw.get("count")
        count = self._expr(count_raw, where) if count_raw is not None else None
        if count is None:
            self.fail(where, "repeat needs a count expression")
        elif isinstance(count, LiteralBlock):
            if isinstance(count.value, str):
                self.fail(where, "repeat count must be a number, not a string literal")
            elif isinstance(count.value, float) and not float(count.value).is_integer():
                self.fail(where, f"repeat count must be whole, got {count.value}")
            elif count.value < 0:
                self.fail(where, "repeat count must be >= 0")
        if "body" not in raw:
            self.fail(where, "repeat needs a body")
        body = self.parse_body(raw.get("body") or [], f"{where} body")
        return RepeatBlock(id=block_id, kind="repeat", count=count, body=body)

    def _parse_if(self, raw: dict, block_id: str) -> Block:
        where = f"block {block_id!r}"
        cond_raw = raw.get("cond")
        cond = self._expr(cond_raw, where) if cond_raw is not None else None
        if cond is None:
            self.fail(where, "if needs a cond expression")
        if "then" not in raw:
            self.fail(where, "if needs a then body")
        then = self.parse_body(raw.get("then") or [], f"{where} then")
        orelse = self.parse_body(raw.get("else") or [], f"{where} else")
        return IfBlock(id=block_id, kind="if", cond=cond, then=then, orelse=orelse)

    def _parse_set_var(self, raw: dict, block_id: str) -> Block:
        where = f"block {block_id!r}"
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            self.fail(where, "set_var needs a non-empty name")
            name = "?"
        value_raw = raw.get("value")
        value = self._expr(value_raw, where) if value_raw is not None else None
        if value is None:
            self.fail(where, "set_var needs a value expression")
        return SetVarBlock(id=block_id, kind="set_var", name=name, value=value)

    def _parse_log(self, raw: dict, block_id: str) -> Block:
        where = f"block {block_id!r}"
        message_raw = raw.get("message")
        message = self._expr(message_raw, where) if message_raw is not None else None
        if message is None:
            self.fail(where, "log needs a message expression")
        return LogBlock(id=block_id, kind="log", message=message)


def parse_workflow(source: str | dict, catalog: Iterable[ToolRef] | None = None) -> Workflow:
    """Parse and validate. Collects every problem it can find into one
    WorkflowValidationError. With catalog=None, tool references go unchecked."""
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise WorkflowValidationError([f"invalid JSON: {exc}"]) from None
    else:
        doc = source
    parser = _Parser(catalog)
    workflow = parser.parse_doc(doc)
    if parser.errors:
        raise WorkflowValidationError(parser.errors)
    return workflow


# -- execution ----------------------------------------------------------------


@dataclass
class ExecutionEvent:
    run_id: str
    seq: int
    kind: str
    ts: float
    block_id: str | None = None
    output: Any = None
    error: str | None = None

    def to_dict(self) -> dict:
        d = {"run_id": self.run_id, "seq": self.seq, "kind": self.kind, "ts": self.ts}
        if self.block_id is not None:
            d["block_id"] = self.block_id
        if self.output is not None:
            d["output"] = self.output
        if self.error is not None:
            d["error"] = self.error
        return d


@dataclass
class RunState:
    run_id: str
    status: str = "running"  # running | succeeded | failed | cancelled
    error: str | None = None
    variables: dict[str, Any] = field(default_factory=dict)
    event_count: int = 0

    @property
    def finished(self) -> bool:
        return self.status in ("succeeded", "failed", "cancelled")


class _Cancelled(Exception):
    pass


class _Halt(Exception):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


def coerce_number(value: Any, context: str) -> float | int:
    if isinstance(value, bool):
        raise _Halt(f"{context}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        match = _TRAILING_NUMBER.search(value)
        if match:
            return float(match.group(0))
        raise _Halt(f"{context}: no trailing number in {value!r}")
    raise _Halt(f"{context}: expected a number, got {type(value).__name__}")


def stringify(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    return str(value)


class _Executor:
    def __init__(
        self,
        workflow: Workflow,
        host: Host,
        sink: Callable[[ExecutionEvent], None] | None,
        run_id: str,
        cancel: threading.Event,
    ):
        self.workflow = workflow
        self.host = host
        self.sink = sink
        self.cancel = cancel
        self.state = RunState(run_id=run_id)
        self._seq = 0

    def emit(self, kind: str, block_id: str | None = None, output=None, error=None) -> None:
        event = ExecutionEvent(
            run_id=self.state.run_id,
            seq=self._seq,
            kind=kind,
            ts=time.time(),
            block_id=block_id,
            output=output,
            error=error,
        )
        self._seq += 1
        self.state.event_count = self._seq
        if self.sink is not None:
            try:
                self.sink(event)
            except Exception:  # noqa: BLE001 - a broken sink must not stop the lab
                logger.exception("event sink failed; continuing run")

    def run(self) -> RunState:
        self.emit("run_started")
        try:
            self._exec_body(self.workflow.blocks)
        except _Cancelled:
            self.state.status = "cancelled"
            self.emit("run_cancelled")
        except _Halt as halt:
            self.state.status = "failed"
            self.state.error = halt.message
            self.emit("run_finished", output={"status": "failed", "error": halt.message})
        else:
            self.state.status = "succeeded"
            self.emit("run_finished", output={"status": "succeeded"})
        return self.state

    def _check_cancel(self) -> None:
        if self.cancel.is_set():
            raise _Cancelled()

    def _exec_body(self, blocks: list[Block]) -> None:
        for block in blocks:
            self._exec_stmt(block)

    def _exec_stmt(self, block: Block) -> None:
        self._check_cancel()
        if isinstance(block, ToolCallBlock):
            self._exec_tool_call(block)
            return
        self.emit("block_started", block.id)
        try:
            output = self._run_stmt(block)
        except _Cancelled:
            self.emit("block_finished", block.id, output={"cancelled": True})
            raise
        except _Halt as halt:
            self.emit("block_failed", block.id, error=halt.message)
            raise
        self.emit("block_finished", block.id, output=output)

    def _run_stmt(self, block: Block):
        if isinstance(block, RepeatBlock):
            count = coerce_number(self._eval(block.count), f"repeat {block.id!r} count")
            if float(count) != int(count) or count < 0:
                raise _Halt(f"repeat {block.id!r}: count must be a whole number >= 0, got {count}")
            for _ in range(int(count)):
                self._check_cancel()
                self._exec_body(block.body)
            return {"iterations": int(count)}
        if isinstance(block, IfBlock):
            cond = self._eval(block.cond)
            if not isinstance(cond, bool):
                raise _Halt(f"if {block.id!r}: condition must be a boolean, got {cond!r}")
            branch = "then" if cond else "else"
            self._exec_body(block.then if cond else block.orelse)
            return {"branch": branch}
        if isinstance(block, SetVarBlock):
            value = self._eval(block.value)
            self.state.variables[block.name] = value
            return {"var": block.name, "value": value}
        if isinstance(block, LogBlock):
            message = stringify(self._eval(block.message))
            return {"message": message}
        raise _Halt(f"block {block.id!r}: cannot execute kind {block.kind!r}")

    def _exec_tool_call(self, block: ToolCallBlock) -> str:
        self._check_cancel()
        self.emit("block_started", block.id)
        try:
            value, output = self._call(block)
        except _Cancelled:
            self.emit("block_finished", block.id, output={"cancelled": True})
            raise
        except _Halt as halt:
            self.emit("block_failed", block.id, error=halt.message)
            raise
        self.emit("block_finished", block.id, output=output)
        return value

    def _call(self, block: ToolCallBlock) -> tuple[str, dict]:
        try:
            ref = self.host.find_tool(block.server, block.tool)
        except Exception as exc:  # noqa: BLE001
            raise _Halt(f"{block.server}.{block.tool}: {exc}") from exc
        props = ref.descriptor.property_map()
        args = {}
        for name, expr in block.args.items():
            raw = self._eval(expr)
            spec = props.get(name)
            context = f"{block.server}.{block.tool} arg {name!r}"
            args[name] = self._coerce_arg(raw, spec.type if spec else None, context)
        try:
            result = self.host.call_tool(block.server, block.tool, args)
        except Exception as exc:  # noqa: BLE001 - any call failure fails the block
            raise _Halt(f"{block.server}.{block.tool}: {exc}") from exc
        if result.is_error:
            raise _Halt(
                f"{block.server}.{block.tool} failed: {result.first_text() or 'no details'}"
            )
        value = result.first_text() or ""
        return value, {"result": result.to_wire(), "value": value}

    @staticmethod
    def _coerce_arg(value: Any, ptype: str | None, context: str):
        if ptype == "number":
            return coerce_number(value, context)
        if ptype == "integer":
            number = coerce_number(value, context)
            if float(number) != int(number):
                raise _Halt(f"{context}: expected an integer, got {number}")
            return int(number)
        if ptype == "string":
            return stringify(value)
        if ptype == "boolean":
            if isinstance(value, bool):
                return value
            raise _Halt(f"{context}: expected a boolean, got {value!r}")
        return value

    def _eval(self, block: Block | None):
        if block is None:
            raise _Halt("missing expression")
        if isinstance(block, LiteralBlock):
            return block.value
        if isinstance(block, VarRefBlock):
            if block.name not in self.state.variables:
                raise _Halt(f"var_ref {block.id!r}: variable {block.name!r} is not set")
            return self.state.variables[block.name]
        if isinstance(block, BinOpBlock):
            return self._eval_binop(block)
        if isinstance(block, ToolCallBlock):
            return self._exec_tool_call(block)
        raise _Halt(f"block {block.id!r}: cannot evaluate kind {block.kind!r}")

    def _eval_binop(self, block: BinOpBlock):
        context = f"binop {block.id!r}"
        if block.op == "neg":
            return -coerce_number(self._eval(block.left), context)
        left = self._eval(block.left)
        right = self._eval(block.right)
        if block.op == "+":
            if isinstance(left, str) and isinstance(right, str):
                return left + right
            return coerce_number(left, context) + coerce_number(right, context)
        if block.op == "==":
            if isinstance(left, str) and isinstance(right, str):
                return left == right
            if isinstance(left, bool) and isinstance(right, bool):
                return left == right
            return coerce_number(left, context) == coerce_number(right, context)
        lnum = coerce_number(left, context)
        rnum = coerce_number(right, context)
        if block.op == "-":
            return lnum - rnum
        if block.op == "*":
            return lnum * rnum
        if block.op == "/":
            if rnum == 0:
                raise _Halt(f"{context}: division by zero")
            return lnum / rnum
        if block.op == "<":
            return lnum < rnum
        if block.op == ">":
            return lnum > rnum
        raise _Halt(f"{context}: unknown op {block.op!r}")


def collect_server_aliases(workflow: Workflow) -> set[str]:
    """Every server alias referenced by any tool_call in the workflow."""
    aliases: set[str] = set()

    def walk(block: Block) -> None:
        if isinstance(block, ToolCallBlock):
            aliases.add(block.server)
            for expr in block.args.values():
                walk(expr)
        elif isinstance(block, RepeatBlock):
            if block.count:
                walk(block.count)
            for child in block.body:
                walk(child)
        elif isinstance(block, IfBlock):
            if block.cond:
                walk(block.cond)
            for child in block.then + block.orelse:
                walk(child)
        elif isinstance(block, SetVarBlock):
            if block.value:
                walk(block.value)
        elif isinstance(block, LogBlock):
            if block.message:
                walk(block.message)
        elif isinstance(block, BinOpBlock):
            if block.left:
                walk(block.left)
            if block.right:
                walk(block.right)

    for block in workflow.blocks:
        walk(block)
    return aliases


def execute(
    workflow: Workflow,
    host: Host,
    sink: Callable[[ExecutionEvent], None] | None = None,
    run_id: str | None = None,
    cancel: threading.Event | None = None,
) -> RunState:
    """Run to completion on the calling thread. Set `cancel` from another
    thread to stop at the next block boundary; the in-flight tool call is
    awaited, open blocks are closed, and the final event is run_cancelled."""
    executor = _Executor(
        workflow,
        host,
        sink,
        run_id or uuid.uuid4().hex,
        cancel if cancel is not None else threading.Event(),
    )
    return executor.run()
