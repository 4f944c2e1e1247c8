// DOM wiring: renders ViewState into the page and forwards user actions
// to the controller. All state lives in the controller; this file only
// draws it.

import { GatewayClient } from "./api.js";
import { ChatController } from "./controller.js";
import { AgentRow } from "./protocol.js";
import { ViewState } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const transcriptEl = el<HTMLUListElement>("transcript");
const inputEl = el<HTMLInputElement>("message-input");
const sendBtn = el<HTMLButtonElement>("send-btn");
const connectBtn = el<HTMLButtonElement>("connect-btn");
const retryBtn = el<HTMLButtonElement>("retry-btn");
const appInput = el<HTMLInputElement>("app-input");
const userInput = el<HTMLInputElement>("user-input");
const agentLabel = el<HTMLSpanElement>("current-agent");
const connectionLabel = el<HTMLSpanElement>("connection-state");
const handoverBanner = el<HTMLDivElement>("handover-banner");
const errorBanner = el<HTMLDivElement>("error-banner");
const tracePanel = el<HTMLDivElement>("trace-panel");
const traceToggle = el<HTMLButtonElement>("trace-toggle");
const contextPanel = el<HTMLDivElement>("context-panel");
const agentsPanel = el<HTMLTableSectionElement>("agents-body");
const refreshAgentsBtn = el<HTMLButtonElement>("refresh-agents");

const gateway = new GatewayClient(window.location.origin.startsWith("http")
  ? window.location.origin
  : "http://127.0.0.1:8000");

function render(state: ViewState): void {
  transcriptEl.replaceChildren(
    ...state.transcript.map((entry) => {
      const item = document.createElement("li");
      item.className = `entry ${entry.speaker}${entry.pending ? " pending" : ""}`;
      const label = document.createElement("span");
      label.className = "label";
      label.textContent =
        entry.speaker === "user" ? "you" : entry.agentName || (entry.speaker === "bot" ? "assistant" : "");
      const text = document.createElement("span");
      text.className = "text";
      text.textContent = entry.pending ? `${entry.text} (pending)` : entry.text;
      item.append(label, text);
      return item;
    }),
  );
  transcriptEl.scrollTop = transcriptEl.scrollHeight;

  agentLabel.textContent = state.currentAgent || "(none yet)";
  connectionLabel.textContent = state.connection;
  connectionLabel.className = `conn ${state.connection}`;

  handoverBanner.hidden = !state.handedOver;
  handoverBanner.textContent = state.handoverReason
    ? `A human agent has taken over this conversation (${state.handoverReason.replace(/_/g, " ")}).`
    : "A human agent has taken over this conversation.";

  errorBanner.hidden = state.errorBanner === null;
  errorBanner.textContent = state.errorBanner ?? "";
  retryBtn.hidden = state.errorBanner === null;

  tracePanel.hidden = !state.showTrace;
  traceToggle.textContent = state.showTrace ? "hide trace" : "show trace";
  if (state.showTrace) {
    tracePanel.replaceChildren(
      ...state.lastTrace.map((item) => {
        const row = document.createElement("div");
        row.className = `trace-row ${item.disposition}`;
        row.textContent =
          `${item.agent_id}  ${item.disposition}  conf ${item.confidence.toFixed(2)}  ` +
          `${item.latency_ms.toFixed(0)} ms`;
        return row;
      }),
    );
  }

  const intents = state.context.intents.length ? state.context.intents.join(" > ") : "(none)";
  const entities = Object.entries(state.context.entities);
  contextPanel.replaceChildren();
  const intentsLine = document.createElement("div");
  intentsLine.textContent = `intents: ${intents}`;
  contextPanel.append(intentsLine);
  for (const [key, value] of entities) {
    const row = document.createElement("div");
    row.textContent = `${key} = ${value}`;
    contextPanel.append(row);
  }
}

const controller = new ChatController(gateway, render);

async function renderAgents(): Promise<void> {
  let rows: AgentRow[] = [];
  try {
    rows = await controller.agentsPanel();
  } catch {
    return;
  }
  agentsPanel.replaceChildren(
    ...rows.map((agent) => {
      const tr = document.createElement("tr");
      for (const value of [agent.name, agent.agent_class, agent.rating]) {
        const td = document.createElement("td");
        td.textContent = value;
        tr.append(td);
      }
      const actions = document.createElement("td");
      for (const score of [1, 5]) {
        const btn = document.createElement("button");
        btn.textContent = `rate ${score}`;
        btn.addEventListener("click", async () => {
          await controller.submitFeedback(agent.agent_id, score);
          await renderAgents();
        });
        actions.append(btn);
      }
      tr.append(actions);
      return tr;
    }),
  );
}

function sendFromInput(): void {
  controller.send(inputEl.value);
  inputEl.value = "";
  inputEl.focus();
}

connectBtn.addEventListener("click", async () => {
  await controller.connect(appInput.value || "banking", userInput.value || "web-user");
  await renderAgents();
});
retryBtn.addEventListener("click", async () => {
  await controller.connect(appInput.value || "banking", userInput.value || "web-user");
  await renderAgents();
});
sendBtn.addEventListener("click", sendFromInput);
inputEl.addEventListener("keydown", (event) => {
  if (event.key === "Enter") {
    sendFromInput();
  }
});
traceToggle.addEventListener("click", () => controller.toggleTrace());
refreshAgentsBtn.addEventListener("click", () => void renderAgents());

render(controller.state);
