"""Command line entry points.

    mcplab serve    --config cfg.json [--host H] [--port N]
    mcplab run      --config cfg.json --workflow wf.json [--out DIR]
    mcplab validate --workflow wf.json [--config cfg.json]

Exit codes: 0 success / valid, 1 failure / invalid, 2 missing input file.
`run` executes in-process (no HTTP server): it spawns the configured tool
servers, streams one line per event to stdout, and with --out writes the
full event log (events.jsonl) plus any image outputs to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from mcplab.service import Orchestrator, OrchestratorConfig, serve
from mcplab.workflow import WorkflowValidationError, parse_workflow

logger = logging.getLogger(__name__)


def _load_json(path: str, what: str):
    p = Path(path)
    if not p.exists():
        print(f"error: {what} file not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        print(f"error: {what} is not valid JSON: {exc}", file=sys.stderr)
        raise SystemExit(1) from None


def _cmd_serve(args) -> int:
    config = OrchestratorConfig.from_dict(_load_json(args.config, "config"))
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    serve(config)
    return 0


def _cmd_validate(args) -> int:
    doc = _load_json(args.workflow, "workflow")
    if args.config:
        config = OrchestratorConfig.from_dict(_load_json(args.config, "config"))
        orch = Orchestrator(config)
        try:
            errors = orch.validate_workflow(doc)
        finally:
            orch.close()
    else:
        # without a config there is no tool catalog; structural checks only
        try:
            parse_workflow(doc, catalog=None)
            errors = []
        except WorkflowValidationError as exc:
            errors = exc.errors
    if errors:
        for error in errors:
            print(f"invalid: {error}")
        return 1
    print("valid")
    return 0


def _event_line(event: dict) -> str:
    parts = [f"[{event['seq']:4d}]", event["kind"]]
    if event.get("block_id"):
        parts.append(event["block_id"])
    output = event.get("output")
    if isinstance(output, dict):
        if "value" in output:
            parts.append(f"-> {output['value']}")
        elif "message" in output:
            parts.append(f"log: {output['message']}")
        elif "status" in output:
            parts.append(output["status"])
    if event.get("error"):
        parts.append(f"error: {event['error']}")
    return " ".join(str(p) for p in parts)


def _write_outputs(out_dir: Path, events: list[dict]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "events.jsonl", "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event) + "\n")
    images = 0
    import base64

    for event in events:
        output = event.get("output")
        if not isinstance(output, dict):
            continue
        result = output.get("result")
        if not isinstance(result, dict):
            continue
        for block in result.get("content", []):
            if block.get("type") != "image":
                continue
            suffix = {"image/png": "png", "image/svg+xml": "svg"}.get(
                block.get("mimeType"), "bin"
            )
            images += 1
            name = f"{event['seq']:04d}-{images:03d}.{suffix}"
            (out_dir / name).write_bytes(base64.b64decode(block.get("data") or ""))
    print(f"wrote {out_dir / 'events.jsonl'} and {images} image file(s)")


def _cmd_run(args) -> int:
    config = OrchestratorConfig.from_dict(_load_json(args.config, "config"))
    doc = _load_json(args.workflow, "workflow")
    orch = Orchestrator(config)
    try:
        for entry in orch.host.list_servers():
            line = f"server {entry.alias}: {entry.status}"
            if entry.error:
                line += f" ({entry.error})"
            print(line)
        try:
            workflow = parse_workflow(doc, orch.host.list_tools())
        except WorkflowValidationError as exc:
            for error in exc.errors:
                print(f"invalid: {error}", file=sys.stderr)
            return 1
        events: list[dict] = []

        def sink(event) -> None:
            d = event.to_dict()
            events.append(d)
            if not args.quiet:
                print(_event_line(d))

        from mcplab.workflow import execute

        state = execute(workflow, orch.host, sink)
        if args.out:
            _write_outputs(Path(args.out), events)
        print(f"run {state.status}" + (f": {state.error}" if state.error else ""))
        return 0 if state.status == "succeeded" else 1
    finally:
        orch.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcplab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the orchestrator HTTP service")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.set_defaults(fn=_cmd_serve)

    p_run = sub.add_parser("run", help="execute a workflow in-process")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--workflow", required=True)
    p_run.add_argument("--out", default=None, help="directory for events.jsonl and images")
    p_run.add_argument("--quiet", action="store_true", help="suppress per-event lines")
    p_run.set_defaults(fn=_cmd_run)

    p_val = sub.add_parser("validate", help="validate a workflow document")
    p_val.add_argument("--workflow", required=True)
    p_val.add_argument("--config", default=None, help="config for full tool-catalog checks")
    p_val.set_defaults(fn=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit:
        raise
    except KeyboardInterrupt:
        return 130
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
