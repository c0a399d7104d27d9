// Execution position comes only from the event stream: block_started turns a
// highlight on, its matching finish/fail turns it off. Nested blocks stack
// (a repeat stays lit while its body runs); the innermost started block wins.

import type { RunEvent } from "./api.js";

export interface HighlightTransition {
  blockId: string;
  on: boolean;
}

export class HighlightTracker {
  private stack: string[] = [];
  /** Every highlight-on in arrival order; tests assert against this. */
  readonly started: string[] = [];
  readonly transitions: HighlightTransition[] = [];

  constructor(private readonly onChange?: (blockId: string | null) => void) {}

  get active(): string | null {
    return this.stack.length > 0 ? this.stack[this.stack.length - 1] : null;
  }

  apply(event: RunEvent): void {
    if (event.kind === "block_started" && event.block_id !== undefined) {
      this.stack.push(event.block_id);
      this.started.push(event.block_id);
      this.transitions.push({ blockId: event.block_id, on: true });
      this.onChange?.(this.active);
      return;
    }
    if (
      (event.kind === "block_finished" || event.kind === "block_failed") &&
      event.block_id !== undefined
    ) {
      const index = this.stack.lastIndexOf(event.block_id);
      if (index >= 0) {
        this.stack.splice(index, 1);
      }
      this.transitions.push({ blockId: event.block_id, on: false });
      this.onChange?.(this.active);
      return;
    }
    if (event.kind === "run_finished" || event.kind === "run_cancelled") {
      this.stack = [];
      this.onChange?.(null);
    }
  }
}
