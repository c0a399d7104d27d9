import { describe, expect, it } from "vitest";
import { SseParser } from "../src/sse.js";

describe("SseParser", () => {
  it("assembles frames across arbitrary chunk boundaries", () => {
    const parser = new SseParser();
    const wire = 'id: 1\ndata: {"a":\ndata: 1}\n\nid: 2\ndata: {"b":2}\n\n';
    const frames = [];
    for (const chunk of wire.match(/.{1,5}/gs) ?? []) {
      frames.push(...parser.push(chunk));
    }
    expect(frames).toEqual([
      { id: "1", data: '{"a":\n1}' },
      { id: "2", data: '{"b":2}' },
    ]);
  });

  it("drops comment lines and keeps the last seen id", () => {
    const parser = new SseParser();
    const frames = parser.push(": keep-alive\n\nid: 7\ndata: x\n\n: keep-alive\ndata: y\n\n");
    expect(frames).toEqual([
      { id: "7", data: "x" },
      { id: "7", data: "y" },
    ]);
  });

  it("handles CRLF line endings", () => {
    const parser = new SseParser();
    const frames = parser.push("data: hello\r\n\r\n");
    expect(frames).toEqual([{ id: null, data: "hello" }]);
  });

  it("does not emit a frame for a blank line without data", () => {
    const parser = new SseParser();
    expect(parser.push("\n\n\n")).toEqual([]);
  });
});
