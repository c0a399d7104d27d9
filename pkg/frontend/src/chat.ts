// Chat panel state fed by the session event stream. Events are idempotent
// per seq, so replay-after-reconnect cannot duplicate rows.

import type { ChatEvent, Proposal } from "./api.js";

export interface ChatRow {
  role: "user" | "assistant" | "tool" | "notice" | "error";
  text: string;
}

export class ChatStore {
  readonly rows: ChatRow[] = [];
  pending: Proposal | null = null;
  autoApprove = false;
  /** Proposal lifecycle by id, for approval cards and tests. */
  readonly proposals = new Map<string, Proposal>();
  private lastSeq = -1;

  constructor(private readonly onChange?: () => void) {}

  applyAll(events: ChatEvent[]): void {
    for (const event of events) {
      this.apply(event);
    }
  }

  apply(event: ChatEvent): void {
    if (event.seq <= this.lastSeq) {
      return;
    }
    this.lastSeq = event.seq;
    switch (event.kind) {
      case "user_message":
        this.rows.push({ role: "user", text: String(event.payload.text ?? "") });
        break;
      case "assistant_message":
        this.rows.push({ role: "assistant", text: String(event.payload.text ?? "") });
        break;
      case "proposal": {
        const proposal = event.payload.proposal as Proposal;
        this.proposals.set(proposal.id, proposal);
        this.pending = proposal;
        break;
      }
      case "proposal_update": {
        const proposal = event.payload.proposal as Proposal;
        this.proposals.set(proposal.id, proposal);
        if (this.pending !== null && this.pending.id === proposal.id) {
          this.pending = proposal.status === "pending" ? proposal : null;
        }
        if (proposal.status === "executed") {
          const text = proposal.result?.content.find((c) => c.type === "text")?.text;
          this.rows.push({
            role: "tool",
            text: `${proposal.server}.${proposal.tool}: ${text ?? "[no text content]"}`,
          });
        } else if (proposal.status === "failed") {
          this.rows.push({
            role: "tool",
            text: `${proposal.server}.${proposal.tool} failed: ${proposal.error ?? "?"}`,
          });
        } else if (proposal.status === "rejected") {
          this.rows.push({
            role: "notice",
            text: `rejected ${proposal.server}.${proposal.tool}`,
          });
        }
        break;
      }
      case "auto_approve":
        this.autoApprove = Boolean(event.payload.enabled);
        break;
      case "notice":
        this.rows.push({ role: "notice", text: String(event.payload.message ?? "") });
        break;
      case "error":
        this.rows.push({ role: "error", text: String(event.payload.message ?? "") });
        break;
      default:
        return;
    }
    this.onChange?.();
  }
}
