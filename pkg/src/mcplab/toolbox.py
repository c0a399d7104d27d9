"""Turn discovered tools into a UI-agnostic block toolbox document.

The document lists block definitions grouped into categories: a fixed Core
category (control flow, variables, literals, arithmetic, log), a Decision
category fed by the configured decision server, and one category per other
server. Tool args map to typed fields (number_input, text_input, checkbox);
a frontend renders fields as value sockets with typed defaults. Tools whose
schema uses anything beyond the scalar types are skipped and reported in
`warnings` instead of being rendered wrong.

Output is deterministic: same catalog, same bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from mcplab.host import ToolRef
from mcplab.protocol.tooltypes import ToolDescriptor

DECISION_CATEGORY = "Decision"
CORE_CATEGORY = "Core"

_FIELD_KINDS = {
    "number": ("number_input", 0),
    "integer": ("number_input", 0),
    "string": ("text_input", ""),
    "boolean": ("checkbox", False),
}


@dataclass
class FieldSpec:
    name: str
    kind: str
    default: object
    required: bool
    description: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "default": self.default,
            "required": self.required,
            "description": self.description,
        }


@dataclass
class BlockDefinition:
    type: str
    label: str
    output: str  # "value" or "none"
    fields: list[FieldSpec] = field(default_factory=list)
    server: str | None = None
    tool: str | None = None
    description: str = ""

    def to_dict(self) -> dict:
        d = {
            "type": self.type,
            "label": self.label,
            "output": self.output,
            "fields": [f.to_dict() for f in self.fields],
            "description": self.description,
        }
        if self.server is not None:
            d["server"] = self.server
            d["tool"] = self.tool
        return d


@dataclass
class ToolboxCategory:
    name: str
    blocks: list[BlockDefinition] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"name": self.name, "blocks": [b.to_dict() for b in self.blocks]}


@dataclass
class ToolboxWarning:
    server: str
    tool: str
    reason: str

    def to_dict(self) -> dict:
        return {"server": self.server, "tool": self.tool, "reason": self.reason}


@dataclass
class ToolboxDocument:
    categories: list[ToolboxCategory]
    warnings: list[ToolboxWarning]

    def to_dict(self) -> dict:
        return {
            "categories": [c.to_dict() for c in self.categories],
            "warnings": [w.to_dict() for w in self.warnings],
        }

    def canonical_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")

    def block_types(self) -> list[str]:
        return [b.type for c in self.categories for b in c.blocks]


def _core_blocks() -> list[BlockDefinition]:
    return [
        BlockDefinition("core.repeat", "repeat", "none",
                        description="Run the body count times."),
        BlockDefinition("core.if", "if", "none",
                        description="Run then or else depending on a boolean condition."),
        BlockDefinition(
            "core.set_var", "set variable", "none",
            [FieldSpec("name", "text_input", "x", True, "variable name")],
            description="Store a value under a name.",
        ),
        BlockDefinition(
            "core.var_ref", "variable", "value",
            [FieldSpec("name", "text_input", "x", True, "variable name")],
            description="Read a stored value.",
        ),
        BlockDefinition(
            "core.literal_number", "number", "value",
            [FieldSpec("value", "number_input", 0, True, "numeric constant")],
            description="A number.",
        ),
        BlockDefinition(
            "core.literal_text", "text", "value",
            [FieldSpec("value", "text_input", "", True, "text constant")],
            description="A text string.",
        ),
        BlockDefinition(
            "core.binop", "operation", "value",
            [FieldSpec("op", "text_input", "+", True, "+ - * / < > == neg")],
            description="Combine or compare two values (neg takes one).",
        ),
        BlockDefinition("core.log", "log", "none",
                        description="Record a message in the run events."),
    ]


def _tool_block(alias: str, descriptor: ToolDescriptor) -> BlockDefinition:
    fields = []
    required = set(descriptor.required)
    for prop in descriptor.properties:
        kind, default = _FIELD_KINDS[prop.type]
        fields.append(
            FieldSpec(prop.name, kind, default, prop.name in required, prop.description)
        )
    return BlockDefinition(
        type=f"{alias}.{descriptor.name}",
        label=descriptor.name,
        output="value",
        fields=fields,
        server=alias,
        tool=descriptor.name,
        description=descriptor.description,
    )


def generate_toolbox(catalog: list[ToolRef], decision_alias: str = "decision") -> ToolboxDocument:
    """Build the toolbox from a host catalog (see Host.list_tools). Core and
    Decision categories are always present, even when empty."""
    warnings: list[ToolboxWarning] = []
    decision_cat = ToolboxCategory(DECISION_CATEGORY)
    server_cats: dict[str, ToolboxCategory] = {}
    for ref in catalog:
        descriptor = ref.descriptor
        if not descriptor.schema_supported:
            bad = ", ".join(
                f"{p.name} ({p.type})" for p in descriptor.unsupported_properties
            )
            warnings.append(
                ToolboxWarning(
                    ref.server_alias,
                    descriptor.name,
                    f"unsupported parameter type: {bad}",
                )
            )
            continue
        block = _tool_block(ref.server_alias, descriptor)
        if ref.server_alias == decision_alias:
            decision_cat.blocks.append(block)
        else:
            cat = server_cats.setdefault(ref.server_alias, ToolboxCategory(ref.server_alias))
            cat.blocks.append(block)
    categories = [ToolboxCategory(CORE_CATEGORY, _core_blocks()), decision_cat]
    categories.extend(server_cats.values())
    return ToolboxDocument(categories=categories, warnings=warnings)
