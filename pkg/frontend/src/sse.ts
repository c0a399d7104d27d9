// Minimal SSE reader over fetch. EventSource would do, but it hides the
// stream teardown and cannot be driven in tests; parsing the frames by hand
// keeps reconnects and shutdown explicit.

export interface SseFrame {
  id: string | null;
  data: string;
}

/** Incremental parser: feed decoded text chunks, get complete frames back.
 * Comment lines (": keep-alive") are dropped. */
export class SseParser {
  private buffer = "";
  private id: string | null = null;
  private data: string[] = [];

  push(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    let index: number;
    while ((index = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, index).replace(/\r$/, "");
      this.buffer = this.buffer.slice(index + 1);
      if (line === "") {
        if (this.data.length > 0) {
          frames.push({ id: this.id, data: this.data.join("\n") });
        }
        this.data = [];
        continue;
      }
      if (line.startsWith(":")) {
        continue;
      }
      const colon = line.indexOf(":");
      const field = colon < 0 ? line : line.slice(0, colon);
      let value = colon < 0 ? "" : line.slice(colon + 1);
      if (value.startsWith(" ")) {
        value = value.slice(1);
      }
      if (field === "data") {
        this.data.push(value);
      } else if (field === "id") {
        this.id = value;
      }
    }
    return frames;
  }
}

export interface Subscription {
  close(): void;
  done: Promise<void>;
}

export interface SubscribeOptions<T> {
  onEvent: (event: T) => void;
  onError?: (error: Error) => void;
  /** Return true to close the stream after this event. */
  isTerminal?: (event: T) => boolean;
  /** Delay before reconnecting after a dropped connection, ms. */
  retryMs?: number;
}

/** Stream JSON events from an SSE endpoint. Reconnects on network drops
 * (the backend replays from the start, so no Last-Event-ID bookkeeping);
 * stops on terminal events, explicit close, or when the server ends a
 * replay-only stream. */
export function subscribeJson<T>(url: string, options: SubscribeOptions<T>): Subscription {
  let closed = false;
  let controller = new AbortController();

  const done = (async () => {
    while (!closed) {
      controller = new AbortController();
      try {
        const response = await fetch(url, {
          signal: controller.signal,
          headers: { accept: "text/event-stream" },
        });
        if (!response.ok || response.body === null) {
          throw new Error(`event stream failed: ${response.status}`);
        }
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
          const { done: eof, value } = await reader.read();
          if (eof) {
            return; // server closed: replay-only stream or terminal event sent
          }
          for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
            let event: T;
            try {
              event = JSON.parse(frame.data) as T;
            } catch {
              continue;
            }
            options.onEvent(event);
            if (options.isTerminal?.(event)) {
              closed = true;
              controller.abort();
              return;
            }
          }
        }
      } catch (error) {
        if (closed) {
          return;
        }
        options.onError?.(error instanceof Error ? error : new Error(String(error)));
        await new Promise((resolve) => setTimeout(resolve, options.retryMs ?? 1000));
      }
    }
  })();

  return {
    close() {
      closed = true;
      controller.abort();
    },
    done: done.catch(() => undefined),
  };
}
