// Runs a six-call workflow against the live backend and checks that the
// event stream drives exactly six highlight transitions in document order,
// each mapping back to the Blockly block that produced it.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import * as Blockly from "blockly";
import { ApiClient, type RunEvent } from "../src/api.js";
import { BlockTranslator } from "../src/blocks.js";
import { HighlightTracker } from "../src/highlight.js";
import { subscribeJson } from "../src/sse.js";
import { startBackend, type Backend } from "./helpers.js";

let backend: Backend;
let client: ApiClient;
let translator: BlockTranslator;

beforeAll(async () => {
  backend = await startBackend();
  client = new ApiClient(backend.base);
  translator = new BlockTranslator(await client.fetchToolbox());
});

afterAll(async () => {
  await backend.stop();
});

describe("highlighting", () => {
  it("six calls produce six in-order transitions on the right blocks", async () => {
    const ws = new Blockly.Workspace();
    try {
      const calls: Blockly.Block[] = [];
      for (let i = 0; i < 6; i++) {
        const block = i % 2 === 0 ? ws.newBlock("fix.tick") : ws.newBlock("fix.count");
        if (calls.length > 0) {
          calls[calls.length - 1].nextConnection!.connect(block.previousConnection!);
        }
        calls.push(block);
      }
      const { doc, owner } = translator.serialize(ws);
      expect(doc.blocks).toHaveLength(6);
      const workflowIds = doc.blocks.map((b) => b.id as string);

      const verdict = await client.validateWorkflow(doc);
      expect(verdict.valid).toBe(true);

      const highlighted: (string | null)[] = [];
      const tracker = new HighlightTracker((blockId) => {
        // what main.ts passes to workspace.highlightBlock
        highlighted.push(blockId === null ? null : owner.get(blockId) ?? null);
      });
      const events: RunEvent[] = [];
      const { run_id } = await client.startRun(doc);
      const subscription = subscribeJson<RunEvent>(client.runEventsUrl(run_id), {
        onEvent: (event) => {
          events.push(event);
          tracker.apply(event);
        },
        isTerminal: (event) => event.kind === "run_finished" || event.kind === "run_cancelled",
      });
      await subscription.done;

      expect(events.at(-1)?.kind).toBe("run_finished");
      expect(tracker.started).toEqual(workflowIds);
      // strict on/off alternation: each call ends before the next starts
      expect(tracker.transitions.map((t) => `${t.on ? "+" : "-"}${t.blockId}`)).toEqual(
        workflowIds.flatMap((id) => [`+${id}`, `-${id}`]),
      );
      expect(tracker.active).toBeNull();

      // the editor saw each Blockly block lit once, in chain order
      const litBlocks = highlighted.filter((id): id is string => id !== null);
      expect(litBlocks).toEqual(calls.map((b) => b.id));
      expect(highlighted.at(-1)).toBeNull();
    } finally {
      ws.dispose();
    }
  });

  it("keeps the enclosing repeat lit while its body runs", async () => {
    const ws = new Blockly.Workspace();
    try {
      const repeat = ws.newBlock("core.repeat");
      const two = ws.newBlock("core.literal_number");
      two.setFieldValue(2, "VALUE");
      repeat.getInput("COUNT")!.connection!.connect(two.outputConnection!);
      const tick = ws.newBlock("fix.tick");
      repeat.getInput("BODY")!.connection!.connect(tick.previousConnection!);

      const { doc, owner } = translator.serialize(ws);
      const tracker = new HighlightTracker();
      const seen: (string | null)[] = [];
      const { run_id } = await client.startRun(doc);
      const subscription = subscribeJson<RunEvent>(client.runEventsUrl(run_id), {
        onEvent: (event) => {
          tracker.apply(event);
          seen.push(tracker.active);
        },
        isTerminal: (event) => event.kind === "run_finished" || event.kind === "run_cancelled",
      });
      await subscription.done;

      const repeatWorkflowId = doc.blocks[0].id as string;
      expect(owner.get(repeatWorkflowId)).toBe(repeat.id);
      // after the body block finishes the repeat is active again, not nothing
      const bodyDone = seen.filter((id) => id === repeatWorkflowId);
      expect(bodyDone.length).toBeGreaterThanOrEqual(3);
      expect(tracker.active).toBeNull();
    } finally {
      ws.dispose();
    }
  });
});
