// Wire types for the gateway's HTTP and WebSocket protocol. This file is
// the console's entire knowledge of the server; nothing else is assumed.
export function parseServerFrame(data) {
    try {
        const frame = JSON.parse(data);
        if (frame && (frame.type === "bot_message" || frame.type === "handover" || frame.type === "error")) {
            return frame;
        }
    }
    catch {
        // fall through: unparseable frames are dropped, never rendered
    }
    return null;
}
