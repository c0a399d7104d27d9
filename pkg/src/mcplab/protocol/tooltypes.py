"""Tool descriptors, call results, and input-schema validation.

Input schemas are deliberately narrow: flat objects whose properties are
number, integer, string, or boolean. Anything else is kept but flagged
unsupported so downstream consumers (toolbox generation) can skip and warn.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

SCALAR_TYPES = ("number", "integer", "string", "boolean")


@dataclass
class PropertySpec:
    name: str
    type: str
    description: str = ""

    @property
    def supported(self) -> bool:
        return self.type in SCALAR_TYPES

    def to_schema(self) -> dict:
        schema: dict = {"type": self.type}
        if self.description:
            schema["description"] = self.description
        return schema


@dataclass
class ToolDescriptor:
    name: str
    description: str = ""
    properties: list[PropertySpec] = field(default_factory=list)
    required: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.name:
            raise ValueError("tool name must be non-empty")
        names = [p.name for p in self.properties]
        if len(set(names)) != len(names):
            raise ValueError(f"tool {self.name}: duplicate property names")
        missing = [r for r in self.required if r not in names]
        if missing:
            raise ValueError(f"tool {self.name}: required but undeclared: {missing}")

    def property_map(self) -> dict[str, PropertySpec]:
        return {p.name: p for p in self.properties}

    @property
    def unsupported_properties(self) -> list[PropertySpec]:
        return [p for p in self.properties if not p.supported]

    @property
    def schema_supported(self) -> bool:
        return not self.unsupported_properties

    def to_wire(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "inputSchema": {
                "type": "object",
                "properties": {p.name: p.to_schema() for p in self.properties},
                "required": list(self.required),
            },
        }

    @classmethod
    def from_wire(cls, wire: dict) -> "ToolDescriptor":
        if not isinstance(wire, dict) or not isinstance(wire.get("name"), str):
            raise ValueError("tool entry must be an object with a name")
        schema = wire.get("inputSchema") or {}
        props_wire = schema.get("properties") or {}
        props = []
        if isinstance(props_wire, dict):
            for pname, pschema in props_wire.items():
                ptype = "unknown"
                desc = ""
                if isinstance(pschema, dict):
                    raw = pschema.get("type")
                    ptype = raw if isinstance(raw, str) else "unknown"
                    desc = pschema.get("description") or ""
                props.append(PropertySpec(pname, ptype, desc))
        required = schema.get("required") or []
        if not isinstance(required, list):
            required = []
        required = [r for r in required if isinstance(r, str) and r in {p.name for p in props}]
        return cls(
            name=wire["name"],
            description=wire.get("description") or "",
            properties=props,
            required=required,
        )


def _type_matches(expected: str, value) -> bool:
    if expected == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if expected == "integer":
        if isinstance(value, bool):
            return False
        if isinstance(value, int):
            return True
        return isinstance(value, float) and value.is_integer()
    if expected == "string":
        return isinstance(value, str)
    if expected == "boolean":
        return isinstance(value, bool)
    # Unsupported declared type: nothing to check against.
    return True


def validate_args(tool: ToolDescriptor, args: dict) -> list[str]:
    """Return a list of violations; empty means the arguments are acceptable."""
    violations = []
    if not isinstance(args, dict):
        return ["arguments must be an object"]
    props = tool.property_map()
    for req in tool.required:
        if req not in args:
            violations.append(f"missing required argument '{req}'")
    for key, value in args.items():
        spec = props.get(key)
        if spec is None:
            violations.append(f"unknown argument '{key}'")
            continue
        if not _type_matches(spec.type, value):
            violations.append(
                f"argument '{key}' must be {spec.type}, got {type(value).__name__}"
            )
    return violations


@dataclass
class ContentBlock:
    kind: str  # "text" or "image"
    text: str | None = None
    data: str | None = None  # base64 payload for images
    mime_type: str | None = None

    @classmethod
    def text_block(cls, text: str) -> "ContentBlock":
        return cls(kind="text", text=text)

    @classmethod
    def image_block(cls, payload: bytes, mime_type: str) -> "ContentBlock":
        return cls(
            kind="image",
            data=base64.b64encode(payload).decode("ascii"),
            mime_type=mime_type,
        )

    def image_bytes(self) -> bytes:
        if self.kind != "image" or self.data is None:
            raise ValueError("not an image block")
        return base64.b64decode(self.data)

    def to_wire(self) -> dict:
        if self.kind == "text":
            return {"type": "text", "text": self.text or ""}
        if self.kind == "image":
            return {
                "type": "image",
                "data": self.data or "",
                "mimeType": self.mime_type or "application/octet-stream",
            }
        raise ValueError(f"unknown content kind {self.kind!r}")

    @classmethod
    def from_wire(cls, wire: dict) -> "ContentBlock":
        if not isinstance(wire, dict):
            raise ValueError("content block must be an object")
        btype = wire.get("type")
        if btype == "text":
            text = wire.get("text")
            return cls(kind="text", text=text if isinstance(text, str) else "")
        if btype == "image":
            return cls(
                kind="image",
                data=wire.get("data") or "",
                mime_type=wire.get("mimeType") or "application/octet-stream",
            )
        raise ValueError(f"unknown content type {btype!r}")


@dataclass
class ToolCallResult:
    content: list[ContentBlock] = field(default_factory=list)
    is_error: bool = False

    @classmethod
    def text(cls, text: str) -> "ToolCallResult":
        return cls(content=[ContentBlock.text_block(text)])

    @classmethod
    def error(cls, message: str) -> "ToolCallResult":
        return cls(content=[ContentBlock.text_block(message)], is_error=True)

    def first_text(self) -> str | None:
        for block in self.content:
            if block.kind == "text":
                return block.text
        return None

    def to_wire(self) -> dict:
        return {
            "content": [b.to_wire() for b in self.content],
            "isError": self.is_error,
        }

    @classmethod
    def from_wire(cls, wire: dict) -> "ToolCallResult":
        if not isinstance(wire, dict):
            raise ValueError("tool result must be an object")
        blocks = []
        raw = wire.get("content")
        if isinstance(raw, list):
            for item in raw:
                blocks.append(ContentBlock.from_wire(item))
        return cls(content=blocks, is_error=bool(wire.get("isError", False)))
