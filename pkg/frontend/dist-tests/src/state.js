// View state and its pure transitions. The transcript is append-only and
// every rendered field traces back to a gateway frame or endpoint reply;
// the reducers never invent state.
export function initialState() {
    return {
        sessionId: null,
        transcript: [],
        currentAgent: "",
        lastTrace: [],
        context: { intents: [], entities: {} },
        connection: "connecting",
        showTrace: false,
        handedOver: false,
        handoverReason: null,
        errorBanner: null,
        pendingQueue: [],
    };
}
function append(state, entry) {
    return { ...state, transcript: [...state.transcript, entry] };
}
export function sessionOpened(state, sessionId, greeting) {
    const next = { ...state, sessionId, errorBanner: null };
    return append(next, { speaker: "bot", text: greeting, agentName: "", pending: false });
}
export function sessionResumed(state, sessionId, agentName, context, handedOver) {
    const next = {
        ...state,
        sessionId,
        currentAgent: agentName,
        context,
        handedOver,
        errorBanner: null,
    };
    return append(next, {
        speaker: "system",
        text: "conversation resumed",
        agentName: "",
        pending: false,
    });
}
export function userMessageSent(state, text) {
    return append(state, { speaker: "user", text, agentName: "", pending: false });
}
export function userMessageQueued(state, text) {
    const next = { ...state, pendingQueue: [...state.pendingQueue, text] };
    return append(next, { speaker: "user", text, agentName: "", pending: true });
}
export function queueFlushed(state) {
    return {
        ...state,
        pendingQueue: [],
        transcript: state.transcript.map((entry) => (entry.pending ? { ...entry, pending: false } : entry)),
    };
}
export function botMessageReceived(state, frame) {
    const next = {
        ...state,
        currentAgent: frame.agent_name,
        lastTrace: frame.trace,
        handedOver: frame.handover,
    };
    return append(next, {
        speaker: "bot",
        text: frame.reply,
        agentName: frame.agent_name,
        pending: false,
    });
}
export function handoverReceived(state, reason) {
    return { ...state, handedOver: true, handoverReason: reason };
}
export function contextUpdated(state, context) {
    return { ...state, context };
}
export function connectionChanged(state, connection, banner) {
    return { ...state, connection, errorBanner: banner ?? (connection === "closed" ? state.errorBanner : null) };
}
export function connectionFailed(state, message) {
    return { ...state, connection: "closed", errorBanner: message };
}
export function traceToggled(state) {
    return { ...state, showTrace: !state.showTrace };
}
