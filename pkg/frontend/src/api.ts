// Typed client for the orchestrator HTTP API. Every shape here mirrors the
// backend's JSON; nothing is invented client-side.

export interface FieldSpec {
  name: string;
  kind: "number_input" | "text_input" | "checkbox";
  default: number | string | boolean;
  required: boolean;
  description: string;
}

export interface BlockDefinition {
  type: string;
  label: string;
  output: "value" | "none";
  fields: FieldSpec[];
  description: string;
  server?: string;
  tool?: string;
}

export interface ToolboxCategory {
  name: string;
  blocks: BlockDefinition[];
}

export interface ToolboxWarning {
  server: string;
  tool: string;
  reason: string;
}

export interface ToolboxDocument {
  categories: ToolboxCategory[];
  warnings: ToolboxWarning[];
}

export interface ServerEntry {
  alias: string;
  status: string;
  identity: { name: string; version: string } | null;
  error: string | null;
  tools: string[];
  transport: Record<string, unknown>;
}

export interface ContentBlock {
  type: "text" | "image";
  text?: string;
  data?: string;
  mimeType?: string;
}

export interface ToolResult {
  content: ContentBlock[];
  isError: boolean;
}

export interface RunEvent {
  run_id: string;
  seq: number;
  kind: string;
  ts: number;
  block_id?: string;
  output?: Record<string, unknown> & { result?: ToolResult; value?: string };
  error?: string;
}

export interface Proposal {
  id: string;
  server: string;
  tool: string;
  args: Record<string, unknown>;
  status: "pending" | "approved" | "rejected" | "executed" | "failed";
  result: ToolResult | null;
  error: string | null;
}

export interface ChatEvent {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
  ts: number;
}

export interface ChatSnapshot {
  session: string;
  auto_approve: boolean;
  pending: Proposal | null;
  transcript: { role: string; text: string }[];
  events: ChatEvent[];
}

export class ApiError extends Error {
  status: number;
  body: Record<string, unknown>;

  constructor(status: number, body: Record<string, unknown>) {
    const detail =
      (body.error as string) ??
      (Array.isArray(body.errors) ? body.errors.join("; ") : `request failed: ${status}`);
    super(detail);
    this.status = status;
    this.body = body;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, init);
  let body: Record<string, unknown> = {};
  try {
    body = await response.json();
  } catch {
    // non-JSON bodies only accompany transport-level failures
  }
  if (!response.ok) {
    throw new ApiError(response.status, body);
  }
  return body as T;
}

function post<T>(base: string, path: string, payload: unknown): Promise<T> {
  return request<T>(base, path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  fetchToolbox(): Promise<ToolboxDocument> {
    return request(this.base, "/toolbox");
  }

  listServers(): Promise<{ servers: ServerEntry[] }> {
    return request(this.base, "/servers");
  }

  validateWorkflow(doc: unknown): Promise<{ valid: boolean; errors: string[] }> {
    return post(this.base, "/workflows/validate", doc);
  }

  startRun(doc: unknown): Promise<{ run_id: string }> {
    return post(this.base, "/workflows/run", doc);
  }

  cancelRun(runId: string): Promise<{ run_id: string; status: string }> {
    return post(this.base, `/runs/${runId}/cancel`, {});
  }

  runEventsUrl(runId: string): string {
    return `${this.base}/runs/${runId}/events`;
  }

  chatSend(sessionId: string, text: string): Promise<{ events: ChatEvent[] }> {
    return post(this.base, `/chat/${sessionId}`, { text });
  }

  chatSnapshot(sessionId: string): Promise<ChatSnapshot> {
    return request(this.base, `/chat/${sessionId}`);
  }

  chatResolve(
    sessionId: string,
    proposalId: string,
    decision: "approve" | "reject",
  ): Promise<{ events: ChatEvent[] }> {
    return post(this.base, `/chat/${sessionId}/approvals/${proposalId}`, { decision });
  }

  chatAutoApprove(
    sessionId: string,
    enabled: boolean,
  ): Promise<{ enabled: boolean; events: ChatEvent[] }> {
    return post(this.base, `/chat/${sessionId}/auto-approve`, { enabled });
  }

  chatEventsUrl(sessionId: string): string {
    return `${this.base}/chat/${sessionId}/events`;
  }
}
