// Event-to-log-row translation shared by the run panel and the chat panel's
// executed tool calls. Rows keep arrival order; images arrive as base64
// content blocks and render as data URIs.

import type { ChatEvent, ContentBlock, Proposal, RunEvent, ToolResult } from "./api.js";

export interface LogImage {
  data: string;
  mimeType: string;
}

export interface LogEntry {
  label: string;
  status: "ok" | "failed" | "info";
  text: string;
  images: LogImage[];
  blockId?: string;
}

function splitContent(result: ToolResult): { text: string; images: LogImage[] } {
  const texts: string[] = [];
  const images: LogImage[] = [];
  for (const block of result.content as ContentBlock[]) {
    if (block.type === "text" && block.text !== undefined) {
      texts.push(block.text);
    } else if (block.type === "image" && block.data !== undefined) {
      images.push({ data: block.data, mimeType: block.mimeType ?? "application/octet-stream" });
    }
  }
  return { text: texts.join("\n"), images };
}

/** Row for a run event, or null for events the log does not show
 * (block_started, heartbeats). */
export function entryFromRunEvent(event: RunEvent): LogEntry | null {
  switch (event.kind) {
    case "run_started":
      return { label: "run", status: "info", text: "started", images: [] };
    case "run_finished": {
      const status = (event.output?.status as string) ?? "succeeded";
      const error = event.output?.error as string | undefined;
      return {
        label: "run",
        status: status === "succeeded" ? "ok" : "failed",
        text: error !== undefined ? `${status}: ${error}` : status,
        images: [],
      };
    }
    case "run_cancelled":
      return { label: "run", status: "info", text: "cancelled", images: [] };
    case "block_failed":
      return {
        label: event.block_id ?? "?",
        status: "failed",
        text: event.error ?? "failed",
        images: [],
        blockId: event.block_id,
      };
    case "block_finished": {
      const output = event.output ?? {};
      if (output.result !== undefined) {
        const { text, images } = splitContent(output.result as ToolResult);
        return {
          label: event.block_id ?? "?",
          status: (output.result as ToolResult).isError ? "failed" : "ok",
          text,
          images,
          blockId: event.block_id,
        };
      }
      if (typeof output.message === "string") {
        return {
          label: event.block_id ?? "?",
          status: "info",
          text: output.message,
          images: [],
          blockId: event.block_id,
        };
      }
      return null; // structural blocks (repeat, if, set_var) stay out of the log
    }
    default:
      return null;
  }
}

/** Row for a chat event. Only proposals that actually executed reach the
 * log; pending, approved-but-running, and rejected ones never do. */
export function entryFromChatEvent(event: ChatEvent): LogEntry | null {
  if (event.kind !== "proposal_update") {
    return null;
  }
  const proposal = event.payload.proposal as Proposal | undefined;
  if (proposal === undefined) {
    return null;
  }
  if (proposal.status === "executed" && proposal.result !== null) {
    const { text, images } = splitContent(proposal.result);
    return {
      label: `${proposal.server}.${proposal.tool}`,
      status: proposal.result.isError ? "failed" : "ok",
      text,
      images,
    };
  }
  if (proposal.status === "failed") {
    return {
      label: `${proposal.server}.${proposal.tool}`,
      status: "failed",
      text: proposal.error ?? "failed",
      images: [],
    };
  }
  return null;
}

export function renderLogEntry(doc: Document, entry: LogEntry): HTMLElement {
  const row = doc.createElement("div");
  row.className = `log-row log-${entry.status}`;
  const badge = doc.createElement("span");
  badge.className = "log-badge";
  badge.textContent = entry.status;
  const label = doc.createElement("span");
  label.className = "log-label";
  label.textContent = entry.label;
  const text = doc.createElement("span");
  text.className = "log-text";
  text.textContent = entry.text;
  row.append(badge, label, text);
  for (const image of entry.images) {
    const img = doc.createElement("img");
    img.className = "log-image";
    img.src = `data:${image.mimeType};base64,${image.data}`;
    row.appendChild(img);
  }
  return row;
}
