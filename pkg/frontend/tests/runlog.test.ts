// @vitest-environment jsdom
//
// Drives a real decision-server campaign cycle and checks that the log rows
// derived from the event stream render, with the history plot appearing as
// an inline data-URI image.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ApiClient, type RunEvent } from "../src/api.js";
import { entryFromRunEvent, renderLogEntry, type LogEntry } from "../src/runlog.js";
import { runToEnd, startBackend, type Backend } from "./helpers.js";

let backend: Backend;
let client: ApiClient;
let events: RunEvent[];
let entries: LogEntry[];

const campaignDoc = {
  version: 1,
  blocks: [
    {
      id: "s1",
      kind: "set_var",
      name: "csv",
      value: {
        id: "e1",
        kind: "tool_call",
        server: "decision",
        tool: "gen_grid",
        args: { step: { id: "e2", kind: "literal", value: 20 } },
      },
    },
    {
      id: "s2",
      kind: "tool_call",
      server: "decision",
      tool: "load_candidates",
      args: { csv: { id: "e3", kind: "var_ref", name: "csv" } },
    },
    {
      id: "s3",
      kind: "tool_call",
      server: "decision",
      tool: "selection",
      args: {
        method: { id: "e4", kind: "literal", value: "random" },
        seed: { id: "e5", kind: "literal", value: 1 },
      },
    },
    {
      id: "s4",
      kind: "tool_call",
      server: "decision",
      tool: "update",
      args: { objective: { id: "e6", kind: "literal", value: -1 } },
    },
    {
      id: "s5",
      kind: "tool_call",
      server: "decision",
      tool: "history_plot",
      args: {},
    },
    {
      id: "s6",
      kind: "log",
      message: { id: "e7", kind: "literal", value: "color recorded" },
    },
  ],
};

beforeAll(async () => {
  backend = await startBackend();
  client = new ApiClient(backend.base);
  events = await runToEnd(client, campaignDoc);
  entries = events
    .map(entryFromRunEvent)
    .filter((entry): entry is LogEntry => entry !== null);
});

afterAll(async () => {
  await backend.stop();
});

describe("run log", () => {
  it("completes the cycle and brackets the log with run rows", () => {
    expect(events.at(-1)?.kind).toBe("run_finished");
    expect(events.at(-1)?.output?.status).toBe("succeeded");
    expect(entries[0]).toMatchObject({ label: "run", status: "info", text: "started" });
    expect(entries.at(-1)).toMatchObject({ label: "run", status: "ok", text: "succeeded" });
  });

  it("shows tool results and log messages but not structural blocks", () => {
    // the tool call nested inside set_var reports under its own id
    const grid = entries.find((entry) => entry.blockId === "e1");
    expect(grid).toBeDefined();
    expect(grid!.status).toBe("ok");
    expect(grid!.text).toContain("objective");

    const logged = entries.find((entry) => entry.blockId === "s6");
    expect(logged).toMatchObject({ status: "info", text: "color recorded" });

    // the set_var wrapper itself stays out of the log
    expect(entries.some((entry) => entry.blockId === "s1")).toBe(false);
  });

  it("renders the history plot inline as a data-URI image", () => {
    const plot = entries.find((entry) => entry.images.length > 0);
    expect(plot, "an entry with an image").toBeDefined();
    expect(plot!.blockId).toBe("s5");
    expect(plot!.images[0].mimeType).toBe("image/png");
    expect(plot!.text).toBe("1 cycles");

    const row = renderLogEntry(document, plot!);
    const img = row.querySelector("img.log-image") as HTMLImageElement | null;
    expect(img).not.toBeNull();
    const prefix = "data:image/png;base64,";
    expect(img!.src.startsWith(prefix)).toBe(true);
    const head = atob(img!.src.slice(prefix.length, prefix.length + 8));
    expect(head.startsWith("\x89PNG")).toBe(true);
  });

  it("renders a plain text row with badge, label, and text", () => {
    const row = renderLogEntry(document, {
      label: "fix.echo",
      status: "ok",
      text: "hi",
      images: [],
    });
    expect(row.className).toBe("log-row log-ok");
    expect(row.querySelector(".log-badge")?.textContent).toBe("ok");
    expect(row.querySelector(".log-label")?.textContent).toBe("fix.echo");
    expect(row.querySelector(".log-text")?.textContent).toBe("hi");
    expect(row.querySelector("img")).toBeNull();
  });
});
