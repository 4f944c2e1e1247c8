// Glues the gateway client to the view state. Owns no DOM: every change
// flows through one render callback, which keeps the whole console testable
// headless and the UI a pure function of ViewState.

import { GatewayClient, SocketHandle } from "./api.js";
import { AgentRow, ServerFrame } from "./protocol.js";
import {
  Connection,
  ViewState,
  botMessageReceived,
  connectionChanged,
  connectionFailed,
  contextUpdated,
  handoverReceived,
  initialState,
  queueFlushed,
  sessionOpened,
  sessionResumed,
  traceToggled,
  userMessageQueued,
  userMessageSent,
} from "./state.js";

export type RenderFn = (state: ViewState) => void;

export class ChatController {
  state: ViewState = initialState();
  private socket: SocketHandle | null = null;
  private appId = "";

  constructor(private gateway: GatewayClient, private render: RenderFn) {}

  private apply(next: ViewState): void {
    this.state = next;
    this.render(this.state);
  }

  async connect(appId: string, user: string): Promise<void> {
    this.appId = appId;
    this.apply(connectionChanged(this.state, "connecting"));
    try {
      const created = await this.gateway.createSession(appId, user);
      this.apply(sessionOpened(this.state, created.session_id, created.greeting));
      this.openSocket(created.session_id);
    } catch (error) {
      this.apply(connectionFailed(this.state, `could not reach gateway: ${String(error)}`));
    }
  }

  // Reconnect path: rebuild what the server session record carries (bound
  // agent, context, status) and reopen the socket on the same session id.
  async resume(appId: string, sessionId: string): Promise<void> {
    this.appId = appId;
    this.apply(connectionChanged(this.state, "connecting"));
    try {
      const record = await this.gateway.getSession(sessionId);
      let agentName = "";
      if (record.serving_agent_id) {
        const agents = await this.gateway.listAgents(appId);
        agentName = agents.find((a) => a.agent_id === record.serving_agent_id)?.name ?? record.serving_agent_id;
      }
      this.apply(
        sessionResumed(this.state, sessionId, agentName, record.context, record.status === "handed_over"),
      );
      this.openSocket(sessionId);
    } catch (error) {
      this.apply(connectionFailed(this.state, `could not resume session: ${String(error)}`));
    }
  }

  private openSocket(sessionId: string): void {
    this.socket = this.gateway.openSocket(sessionId, {
      onOpen: () => {
        const queued = this.state.pendingQueue;
        this.apply(connectionChanged(this.state, "open"));
        if (queued.length > 0) {
          this.apply(queueFlushed(this.state));
          for (const text of queued) {
            this.socket?.send(text);
          }
        }
      },
      onFrame: (frame) => this.onFrame(frame),
      onClose: () => this.apply(connectionChanged(this.state, "closed")),
      onError: (message) => this.apply(connectionFailed(this.state, message)),
    });
  }

  private onFrame(frame: ServerFrame): void {
    if (frame.type === "bot_message") {
      this.apply(botMessageReceived(this.state, frame));
      void this.refreshContext();
    } else if (frame.type === "handover") {
      this.apply(handoverReceived(this.state, frame.reason));
    } else {
      this.apply(connectionFailed(this.state, `gateway error: ${frame.code}`));
    }
  }

  private async refreshContext(): Promise<void> {
    if (!this.state.sessionId) {
      return;
    }
    try {
      const record = await this.gateway.getSession(this.state.sessionId);
      this.apply(contextUpdated(this.state, record.context));
    } catch {
      // context panel is best-effort; the transcript stays authoritative
    }
  }

  send(text: string): void {
    const trimmed = text.trim();
    if (!trimmed || !this.state.sessionId) {
      return;
    }
    if (this.state.connection !== "open" || this.socket === null) {
      this.apply(userMessageQueued(this.state, trimmed));
      return;
    }
    this.apply(userMessageSent(this.state, trimmed));
    this.socket.send(trimmed);
  }

  async submitFeedback(agentId: string, score: number): Promise<void> {
    if (!this.state.sessionId) {
      return;
    }
    await this.gateway.postFeedback(this.state.sessionId, agentId, score);
  }

  async agentsPanel(): Promise<AgentRow[]> {
    return this.gateway.listAgents(this.appId);
  }

  toggleTrace(): void {
    this.apply(traceToggled(this.state));
  }

  connection(): Connection {
    return this.state.connection;
  }

  close(): void {
    this.socket?.close();
  }
}
