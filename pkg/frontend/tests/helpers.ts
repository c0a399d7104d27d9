// Spawns the real orchestrator for integration tests. Each call gets its own
// port and temp config, so test files can run in parallel workers.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import path from "node:path";
import type { ApiClient, RunEvent } from "../src/api.js";
import { subscribeJson } from "../src/sse.js";

export interface ScriptStep {
  text?: string;
  tool?: string;
  server?: string;
  args?: Record<string, unknown>;
}

export interface Backend {
  base: string;
  stop(): Promise<void>;
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      srv.close(() => resolve(address.port));
    });
    srv.on("error", reject);
  });
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export async function startBackend(script: ScriptStep[] = []): Promise<Backend> {
  const port = await freePort();
  const dir = mkdtempSync(path.join(tmpdir(), "mcplab-ui-"));
  const config = {
    host: "127.0.0.1",
    port,
    decision_alias: "decision",
    servers: [
      {
        alias: "fix",
        transport: { kind: "stdio", command: ["python3", "-m", "mcplab.fixtures"] },
      },
      {
        alias: "decision",
        transport: { kind: "stdio", command: ["python3", "-m", "mcplab.decision"] },
      },
    ],
    agent: { backend: "scripted", script },
  };
  const configPath = path.join(dir, "config.json");
  writeFileSync(configPath, JSON.stringify(config));

  const child: ChildProcess = spawn(
    "python3",
    ["-m", "mcplab.cli", "serve", "--config", configPath],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  child.stderr?.on("data", (chunk) => {
    stderr += String(chunk);
  });
  let exited = false;
  const exit = new Promise<void>((resolve) => {
    child.on("exit", () => {
      exited = true;
      resolve();
    });
  });

  const base = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 45_000;
  for (;;) {
    if (exited) {
      throw new Error(`backend exited during startup:\n${stderr}`);
    }
    if (Date.now() > deadline) {
      child.kill("SIGKILL");
      throw new Error(`backend did not come up on ${base}:\n${stderr}`);
    }
    try {
      const response = await fetch(`${base}/servers`);
      if (response.ok) {
        const body = (await response.json()) as { servers: { status: string }[] };
        if (body.servers.every((s) => s.status === "ready")) {
          break;
        }
      }
    } catch {
      // not listening yet
    }
    await sleep(200);
  }

  return {
    base,
    async stop() {
      child.kill("SIGTERM");
      await Promise.race([exit, sleep(5_000)]);
      if (!exited) {
        child.kill("SIGKILL");
        await exit;
      }
    },
  };
}

/** Start a run and collect its full event stream through the SSE client. */
export async function runToEnd(client: ApiClient, doc: unknown): Promise<RunEvent[]> {
  const { run_id } = await client.startRun(doc);
  const events: RunEvent[] = [];
  const subscription = subscribeJson<RunEvent>(client.runEventsUrl(run_id), {
    onEvent: (event) => events.push(event),
    isTerminal: (event) => event.kind === "run_finished" || event.kind === "run_cancelled",
  });
  await subscription.done;
  return events;
}
