// ToolboxDocument -> Blockly block definitions and toolbox config, plus the
// reverse path: workspace -> workflow JSON the backend accepts.
//
// Tool blocks are statements with one value socket per argument and a
// "save as" variable field; leaving the field empty serializes to a bare
// tool_call, filling it wraps the call in set_var. Number and text args get
// typed shadow literals so a freshly dragged block already serializes to a
// valid document. Boolean args get an empty socket: the workflow language
// has no boolean literal, only comparisons and variables can fill it.

import * as Blockly from "blockly";
import type { BlockDefinition, ToolboxDocument } from "./api.js";

export interface WorkflowDoc {
  version: number;
  blocks: Record<string, unknown>[];
}

export interface SerializedWorkspace {
  doc: WorkflowDoc;
  /** workflow block id -> Blockly block id, for event-driven highlighting */
  owner: Map<string, string>;
}

interface ToolShape {
  server: string;
  tool: string;
  args: { name: string; kind: string; default: number | string | boolean }[];
}

const CATEGORY_COLOURS: Record<string, number> = { Core: 210, Decision: 290 };

function categoryColour(name: string): number {
  const fixed = CATEGORY_COLOURS[name];
  if (fixed !== undefined) {
    return fixed;
  }
  let hash = 0;
  for (let i = 0; i < name.length; i++) {
    hash = (hash * 31 + name.charCodeAt(i)) | 0;
  }
  return Math.abs(hash) % 360;
}

function numberShadow(value: number): Record<string, unknown> {
  return { shadow: { type: "core.literal_number", fields: { VALUE: value } } };
}

function textShadow(value: string): Record<string, unknown> {
  return { shadow: { type: "core.literal_text", fields: { VALUE: value } } };
}

// Comparison shadow so an if block validates before the user touches it.
const BOOL_SHADOW = {
  shadow: {
    type: "core.binop",
    fields: { OP: "==" },
    inputs: { LEFT: numberShadow(0), RIGHT: numberShadow(0) },
  },
};

const CORE_DEFINITIONS: Record<string, unknown>[] = [
  {
    type: "core.repeat",
    message0: "repeat %1 times",
    args0: [{ type: "input_value", name: "COUNT" }],
    message1: "do %1",
    args1: [{ type: "input_statement", name: "BODY" }],
    previousStatement: null,
    nextStatement: null,
    colour: 210,
    tooltip: "Run the body count times.",
  },
  {
    type: "core.if",
    message0: "if %1",
    args0: [{ type: "input_value", name: "COND" }],
    message1: "then %1",
    args1: [{ type: "input_statement", name: "THEN" }],
    message2: "else %1",
    args2: [{ type: "input_statement", name: "ELSE" }],
    previousStatement: null,
    nextStatement: null,
    colour: 210,
    tooltip: "Run then or else depending on a boolean condition.",
  },
  {
    type: "core.set_var",
    message0: "set %1 to %2",
    args0: [
      { type: "field_input", name: "NAME", text: "x" },
      { type: "input_value", name: "VALUE" },
    ],
    previousStatement: null,
    nextStatement: null,
    colour: 330,
    tooltip: "Store a value under a name.",
  },
  {
    type: "core.var_ref",
    message0: "%1",
    args0: [{ type: "field_input", name: "NAME", text: "x" }],
    output: null,
    colour: 330,
    tooltip: "Read a stored value.",
  },
  {
    type: "core.literal_number",
    message0: "%1",
    args0: [{ type: "field_number", name: "VALUE", value: 0 }],
    output: null,
    colour: 160,
    tooltip: "A number.",
  },
  {
    type: "core.literal_text",
    message0: '" %1 "',
    args0: [{ type: "field_input", name: "VALUE", text: "" }],
    output: null,
    colour: 160,
    tooltip: "A text string.",
  },
  {
    type: "core.binop",
    message0: "%1 %2 %3",
    args0: [
      { type: "input_value", name: "LEFT" },
      {
        type: "field_dropdown",
        name: "OP",
        options: [
          ["+", "+"],
          ["-", "-"],
          ["*", "*"],
          ["/", "/"],
          ["<", "<"],
          [">", ">"],
          ["==", "=="],
          ["neg", "neg"],
        ],
      },
      { type: "input_value", name: "RIGHT" },
    ],
    inputsInline: true,
    output: null,
    colour: 230,
    tooltip: "Combine or compare two values (neg uses only the left one).",
  },
  {
    type: "core.log",
    message0: "log %1",
    args0: [{ type: "input_value", name: "MESSAGE" }],
    previousStatement: null,
    nextStatement: null,
    colour: 210,
    tooltip: "Record a message in the run events.",
  },
];

const CORE_PALETTE: Record<string, unknown>[] = [
  { kind: "block", type: "core.repeat", inputs: { COUNT: numberShadow(3) } },
  { kind: "block", type: "core.if", inputs: { COND: BOOL_SHADOW } },
  { kind: "block", type: "core.set_var", inputs: { VALUE: numberShadow(0) } },
  { kind: "block", type: "core.var_ref" },
  { kind: "block", type: "core.literal_number" },
  { kind: "block", type: "core.literal_text" },
  {
    kind: "block",
    type: "core.binop",
    inputs: { LEFT: numberShadow(0), RIGHT: numberShadow(0) },
  },
  { kind: "block", type: "core.log", inputs: { MESSAGE: textShadow("") } },
];

export class BlockTranslator {
  readonly toolboxConfig: { kind: string; contents: Record<string, unknown>[] };
  private readonly tools = new Map<string, ToolShape>();

  constructor(doc: ToolboxDocument) {
    const definitions: Record<string, unknown>[] = [...CORE_DEFINITIONS];
    const contents: Record<string, unknown>[] = [];
    for (const category of doc.categories) {
      const colour = categoryColour(category.name);
      const items: Record<string, unknown>[] = [];
      if (category.name === "Core") {
        items.push(...CORE_PALETTE);
      }
      for (const block of category.blocks) {
        if (block.server === undefined || block.tool === undefined) {
          continue; // core entries are informational; shapes are defined above
        }
        definitions.push(this.toolDefinition(block, colour));
        items.push(this.toolPaletteItem(block));
        this.tools.set(block.type, {
          server: block.server,
          tool: block.tool,
          args: block.fields.map((f) => ({ name: f.name, kind: f.kind, default: f.default })),
        });
      }
      contents.push({ kind: "category", name: category.name, colour: String(colour), contents: items });
    }
    for (const def of definitions) {
      // tests and toolbox reloads redefine; drop stale entries to keep
      // Blockly from warning about overwrites
      delete (Blockly.Blocks as Record<string, unknown>)[def.type as string];
    }
    Blockly.common.defineBlocksWithJsonArray(definitions);
    this.toolboxConfig = { kind: "categoryToolbox", contents };
  }

  private toolDefinition(block: BlockDefinition, colour: number): Record<string, unknown> {
    let message = block.label;
    const args: Record<string, unknown>[] = [];
    for (const spec of block.fields) {
      message += ` ${spec.name} %${args.length + 1}`;
      args.push({ type: "input_value", name: `ARG_${spec.name}` });
    }
    message += ` save as %${args.length + 1}`;
    args.push({ type: "field_input", name: "RESULT_VAR", text: "" });
    return {
      type: block.type,
      message0: message,
      args0: args,
      previousStatement: null,
      nextStatement: null,
      colour,
      tooltip: block.description,
      inputsInline: false,
    };
  }

  private toolPaletteItem(block: BlockDefinition): Record<string, unknown> {
    const inputs: Record<string, unknown> = {};
    for (const spec of block.fields) {
      if (spec.kind === "number_input") {
        inputs[`ARG_${spec.name}`] = numberShadow(Number(spec.default) || 0);
      } else if (spec.kind === "text_input") {
        inputs[`ARG_${spec.name}`] = textShadow(String(spec.default ?? ""));
      }
      // checkbox args keep an open socket: booleans only come from
      // comparisons or variables in this workflow language
    }
    const item: Record<string, unknown> = { kind: "block", type: block.type };
    if (Object.keys(inputs).length > 0) {
      item.inputs = inputs;
    }
    return item;
  }

  isToolType(type: string): boolean {
    return this.tools.has(type);
  }

  /** Walk the workspace top-to-bottom and emit the backend workflow JSON.
   * Floating expression blocks are scratch material and are skipped. */
  serialize(workspace: Blockly.Workspace): SerializedWorkspace {
    const owner = new Map<string, string>();
    let counter = 0;
    const nextId = (blocklyId: string): string => {
      const id = `b${++counter}`;
      owner.set(id, blocklyId);
      return id;
    };

    const expression = (block: Blockly.Block | null): Record<string, unknown> | null => {
      if (block === null) {
        return null;
      }
      const id = nextId(block.id);
      switch (block.type) {
        case "core.literal_number":
          return { id, kind: "literal", value: Number(block.getFieldValue("VALUE")) };
        case "core.literal_text":
          return { id, kind: "literal", value: String(block.getFieldValue("VALUE")) };
        case "core.var_ref":
          return { id, kind: "var_ref", name: String(block.getFieldValue("NAME")) };
        case "core.binop": {
          const op = String(block.getFieldValue("OP"));
          const node: Record<string, unknown> = { id, kind: "binop", op };
          const left = expression(block.getInputTargetBlock("LEFT"));
          if (left !== null) {
            node.left = left;
          }
          if (op !== "neg") {
            const right = expression(block.getInputTargetBlock("RIGHT"));
            if (right !== null) {
              node.right = right;
            }
          }
          return node;
        }
        default:
          return null;
      }
    };

    const toolCall = (block: Blockly.Block, shape: ToolShape, id: string): Record<string, unknown> => {
      const args: Record<string, unknown> = {};
      for (const arg of shape.args) {
        const value = expression(block.getInputTargetBlock(`ARG_${arg.name}`));
        if (value !== null) {
          args[arg.name] = value;
        }
      }
      return { id, kind: "tool_call", server: shape.server, tool: shape.tool, args };
    };

    const statement = (block: Blockly.Block): Record<string, unknown> | null => {
      const shape = this.tools.get(block.type);
      if (shape !== undefined) {
        const resultVar = String(block.getFieldValue("RESULT_VAR") ?? "").trim();
        if (resultVar !== "") {
          const id = nextId(block.id);
          return {
            id,
            kind: "set_var",
            name: resultVar,
            value: toolCall(block, shape, nextId(block.id)),
          };
        }
        return toolCall(block, shape, nextId(block.id));
      }
      switch (block.type) {
        case "core.repeat": {
          const id = nextId(block.id);
          const node: Record<string, unknown> = { id, kind: "repeat", body: body(block, "BODY") };
          const count = expression(block.getInputTargetBlock("COUNT"));
          if (count !== null) {
            node.count = count;
          }
          return node;
        }
        case "core.if": {
          const id = nextId(block.id);
          const node: Record<string, unknown> = {
            id,
            kind: "if",
            then: body(block, "THEN"),
            else: body(block, "ELSE"),
          };
          const cond = expression(block.getInputTargetBlock("COND"));
          if (cond !== null) {
            node.cond = cond;
          }
          return node;
        }
        case "core.set_var": {
          const id = nextId(block.id);
          const node: Record<string, unknown> = {
            id,
            kind: "set_var",
            name: String(block.getFieldValue("NAME")),
          };
          const value = expression(block.getInputTargetBlock("VALUE"));
          if (value !== null) {
            node.value = value;
          }
          return node;
        }
        case "core.log": {
          const id = nextId(block.id);
          const node: Record<string, unknown> = { id, kind: "log" };
          const message = expression(block.getInputTargetBlock("MESSAGE"));
          if (message !== null) {
            node.message = message;
          }
          return node;
        }
        default:
          return null;
      }
    };

    const chain = (start: Blockly.Block | null): Record<string, unknown>[] => {
      const nodes: Record<string, unknown>[] = [];
      for (let block = start; block !== null; block = block.getNextBlock()) {
        const node = statement(block);
        if (node !== null) {
          nodes.push(node);
        }
      }
      return nodes;
    };

    const body = (block: Blockly.Block, input: string): Record<string, unknown>[] =>
      chain(block.getInputTargetBlock(input));

    const blocks: Record<string, unknown>[] = [];
    for (const top of workspace.getTopBlocks(true)) {
      blocks.push(...chain(top));
    }
    return { doc: { version: 1, blocks }, owner };
  }
}
