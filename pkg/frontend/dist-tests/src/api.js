// Thin gateway client. fetch and the WebSocket constructor are injectable
// so unit tests can run against fakes and the e2e suite against the real
// server.
import { parseServerFrame } from "./protocol.js";
export class GatewayError extends Error {
    constructor(code, message) {
        super(message);
        this.code = code;
    }
}
async function expectJson(response) {
    if (!response.ok) {
        let code = `http_${response.status}`;
        let message = response.statusText;
        try {
            const body = await response.json();
            code = body.code ?? code;
            message = body.message ?? message;
        }
        catch {
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
    constructor(baseUrl, options = {}) {
        this.baseUrl = baseUrl;
        this.baseUrl = baseUrl.replace(/\/$/, "");
        this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
        this.wsFactory =
            options.wsFactory ?? ((url) => new globalThis.WebSocket(url));
    }
    wsUrl(sessionId) {
        const base = this.baseUrl.replace(/^http/, "ws");
        return `${base}/ws/sessions/${sessionId}`;
    }
    async createSession(appId, user, channel = "web") {
        const response = await this.fetchFn(`${this.baseUrl}/api/apps/${appId}/sessions`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ user, channel }),
        });
        return expectJson(response);
    }
    async getSession(sessionId) {
        const response = await this.fetchFn(`${this.baseUrl}/api/sessions/${sessionId}`);
        return expectJson(response);
    }
    async listAgents(appId) {
        const response = await this.fetchFn(`${this.baseUrl}/api/apps/${appId}/agents`);
        return expectJson(response);
    }
    async postFeedback(sessionId, agentId, score, comment = "") {
        const response = await this.fetchFn(`${this.baseUrl}/api/sessions/${sessionId}/feedback`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ agent_id: agentId, score, comment }),
        });
        await expectJson(response);
    }
    openSocket(sessionId, handlers) {
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
            send: (text) => ws.send(JSON.stringify({ type: "user_message", text })),
            close: () => ws.close(),
        };
    }
}
