// Page wiring: Blockly editor on the left, run log on the right, chat below
// the log. All state flows through the stores in blocks/highlight/runlog/chat;
// this file only touches the DOM.

import * as Blockly from "blockly";
import { ApiClient, ApiError, type ChatEvent, type RunEvent } from "./api.js";
import { BlockTranslator } from "./blocks.js";
import { ChatStore } from "./chat.js";
import { HighlightTracker } from "./highlight.js";
import { entryFromChatEvent, entryFromRunEvent, renderLogEntry } from "./runlog.js";
import { subscribeJson, type Subscription } from "./sse.js";

const CHAT_SESSION = "default";
const TERMINAL = new Set(["run_finished", "run_cancelled"]);

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function setStatus(text: string, tone: "ok" | "failed" | "info"): void {
  const banner = el<HTMLDivElement>("status");
  banner.textContent = text;
  banner.className = `status status-${tone}`;
}

function appendLog(entry: ReturnType<typeof entryFromRunEvent>): void {
  if (entry === null) {
    return;
  }
  const log = el<HTMLDivElement>("log");
  log.appendChild(renderLogEntry(document, entry));
  log.scrollTop = log.scrollHeight;
}

async function boot(): Promise<void> {
  let translator: BlockTranslator;
  try {
    const doc = await api.fetchToolbox();
    translator = new BlockTranslator(doc);
    if (doc.warnings.length > 0) {
      const banner = el<HTMLDivElement>("warnings");
      banner.textContent =
        "skipped tools: " +
        doc.warnings.map((w) => `${w.server}.${w.tool} (${w.reason})`).join("; ");
      banner.style.display = "block";
    }
  } catch (error) {
    const retry = el<HTMLDivElement>("load-error");
    retry.style.display = "block";
    retry.querySelector("span")!.textContent = String(error);
    retry.querySelector("button")!.onclick = () => {
      retry.style.display = "none";
      void boot();
    };
    return;
  }

  const workspace = Blockly.inject("editor", {
    toolbox: translator.toolboxConfig as unknown as Blockly.utils.toolbox.ToolboxDefinition,
    trashcan: true,
  });

  let runSub: Subscription | null = null;
  let currentRun: string | null = null;
  let owner = new Map<string, string>();

  const runButton = el<HTMLButtonElement>("run");
  const cancelButton = el<HTMLButtonElement>("cancel");

  runButton.onclick = async () => {
    runSub?.close();
    el<HTMLDivElement>("log").replaceChildren();
    const serialized = translator.serialize(workspace);
    owner = serialized.owner;
    try {
      const check = await api.validateWorkflow(serialized.doc);
      if (!check.valid) {
        setStatus(`invalid workflow: ${check.errors.join("; ")}`, "failed");
        return;
      }
      const { run_id } = await api.startRun(serialized.doc);
      currentRun = run_id;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        setStatus(`servers busy: ${(error.body.busy as string[]).join(", ")}`, "failed");
      } else {
        setStatus(String(error), "failed");
      }
      return;
    }
    setStatus(`running ${currentRun}`, "info");
    cancelButton.disabled = false;
    const tracker = new HighlightTracker((blockId) => {
      const blocklyId = blockId !== null ? owner.get(blockId) : undefined;
      workspace.highlightBlock(blocklyId ?? null);
    });
    runSub = subscribeJson<RunEvent>(api.runEventsUrl(currentRun), {
      onEvent: (event) => {
        tracker.apply(event);
        appendLog(entryFromRunEvent(event));
        if (event.kind === "run_finished") {
          const status = (event.output?.status as string) ?? "succeeded";
          setStatus(`run ${status}`, status === "succeeded" ? "ok" : "failed");
          cancelButton.disabled = true;
        } else if (event.kind === "run_cancelled") {
          setStatus("run cancelled", "info");
          cancelButton.disabled = true;
        }
      },
      isTerminal: (event) => TERMINAL.has(event.kind),
      onError: () => setStatus("event stream dropped, reconnecting", "info"),
    });
  };

  cancelButton.onclick = async () => {
    if (currentRun !== null) {
      await api.cancelRun(currentRun).catch(() => undefined);
    }
  };

  await bootChat();
}

async function bootChat(): Promise<void> {
  const messages = el<HTMLDivElement>("chat-messages");
  const card = el<HTMLDivElement>("approval-card");
  const store = new ChatStore(() => {
    messages.replaceChildren(
      ...store.rows.map((row) => {
        const div = document.createElement("div");
        div.className = `chat-row chat-${row.role}`;
        div.textContent = row.text;
        return div;
      }),
    );
    messages.scrollTop = messages.scrollHeight;
    renderCard();
    el<HTMLInputElement>("auto-approve").checked = store.autoApprove;
  });

  function renderCard(): void {
    const proposal = store.pending;
    if (proposal === null) {
      card.style.display = "none";
      return;
    }
    card.style.display = "block";
    el<HTMLDivElement>("approval-title").textContent =
      `${proposal.server}.${proposal.tool}`;
    el<HTMLPreElement>("approval-args").textContent = JSON.stringify(proposal.args, null, 2);
    el<HTMLButtonElement>("approve").onclick = () => {
      void api.chatResolve(CHAT_SESSION, proposal.id, "approve").catch(() => undefined);
    };
    el<HTMLButtonElement>("reject").onclick = () => {
      void api.chatResolve(CHAT_SESSION, proposal.id, "reject").catch(() => undefined);
    };
  }

  // chat tool executions land in the experiment log too; dedupe by seq so a
  // reconnect replay cannot double rows the store already ignored
  let lastLogged = -1;
  const originalApply = store.apply.bind(store);
  store.apply = (event: ChatEvent) => {
    originalApply(event);
    if (event.seq > lastLogged) {
      lastLogged = event.seq;
      appendLog(entryFromChatEvent(event));
    }
  };

  subscribeJson<ChatEvent>(api.chatEventsUrl(CHAT_SESSION), {
    onEvent: (event) => store.apply(event),
  });

  el<HTMLInputElement>("auto-approve").onchange = (e) => {
    const enabled = (e.target as HTMLInputElement).checked;
    void api.chatAutoApprove(CHAT_SESSION, enabled).catch(() => undefined);
  };

  el<HTMLFormElement>("composer").onsubmit = async (e) => {
    e.preventDefault();
    const input = el<HTMLInputElement>("chat-input");
    const text = input.value.trim();
    if (text === "") {
      return;
    }
    input.value = "";
    try {
      await api.chatSend(CHAT_SESSION, text);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        setStatus("a proposal is waiting for approval", "failed");
      }
    }
  };
}

void boot();
