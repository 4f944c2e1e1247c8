// Thin gateway client. fetch and the WebSocket constructor are injectable
// so unit tests can run against fakes and the e2e suite against the real
// server.

import { AgentRow, ServerFrame, SessionCreated, SessionRecord, parseServerFrame } from "./protocol.js";

export interface WsLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;
export type WsFactory = (url: string) => WsLike;

export interface SocketHandlers {
  onOpen: () => void;
  onFrame: (frame: ServerFrame) => void;
  onClose: () => void;
  onError: (message: string) => void;
}

export interface SocketHandle {
  send(text: string): void;
  close(): void;
}

export class GatewayError extends Error {
  constructor(public code: string, message: string) {
    super(message);
  }
}

async function expectJson(response: Response): Promise<any> {
  if (!response.ok) {
    let code = `http_${response.status}`;
    let message = response.statusText;
    try {
      const body = await response.json();
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body; keep the HTTP status
    }
    throw new GatewayError(code, message);
  }
  if (response.status === 204) {
    return null;
  }
  return response.json();
}

export class GatewayClient {
  private fetchFn: FetchLike;
  private wsFactory: WsFactory;

  constructor(
    public baseUrl: string,
    options: { fetchFn?: FetchLike; wsFactory?: WsFactory } = {},
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.wsFactory =
      options.wsFactory ?? ((url) => new (globalThis as any).WebSocket(url) as WsLike);
  }

  private wsUrl(sessionId: string): string {
    const base = this.baseUrl.replace(/^http/, "ws");
    return `${base}/ws/sessions/${sessionId}`;
  }

  async createSession(appId: string, user: string, channel = "web"): Promise<SessionCreated> {
    const response = await this.fetchFn(`${this.baseUrl}/api/apps/${appId}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ user, channel }),
    });
    return expectJson(response);
  }

  async getSession(sessionId: string): Promise<SessionRecord> {
    const response = await this.fetchFn(`${this.baseUrl}/api/sessions/${sessionId}`);
    return expectJson(response);
  }

  async listAgents(appId: string): Promise<AgentRow[]> {
    const response = await this.fetchFn(`${this.baseUrl}/api/apps/${appId}/agents`);
    return expectJson(response);
  }

  async postFeedback(sessionId: string, agentId: string, score: number, comment = ""): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/api/sessions/${sessionId}/feedback`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ agent_id: agentId, score, comment }),
    });
    await expectJson(response);
  }

  openSocket(sessionId: string, handlers: SocketHandlers): SocketHandle {
    const ws = this.wsFactory(this.wsUrl(sessionId));
    ws.onopen = () => handlers.onOpen();
    ws.onclose = () => handlers.onClose();
    ws.onerror = () => handlers.onError("websocket error");
    ws.onmessage = (event) => {
      const frame = parseServerFrame(String(event.data));
      if (frame !== null) {
        handlers.onFrame(frame);
      }
    };
    return {
      send: (text: string) => ws.send(JSON.stringify({ type: "user_message", text })),
      close: () => ws.close(),
    };
  }
}
