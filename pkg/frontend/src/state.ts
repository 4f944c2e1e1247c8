// View state and its pure transitions. The transcript is append-only and
// every rendered field traces back to a gateway frame or endpoint reply;
// the reducers never invent state.

import { BotMessageFrame, SessionContext, TraceItem } from "./protocol.js";

export type Speaker = "user" | "bot" | "system";
export type Connection = "connecting" | "open" | "closed";

export interface TranscriptEntry {
  speaker: Speaker;
  text: string;
  agentName: string;
  pending: boolean;
}

export interface ViewState {
  sessionId: string | null;
  transcript: TranscriptEntry[];
  currentAgent: string;
  lastTrace: TraceItem[];
  context: SessionContext;
  connection: Connection;
  showTrace: boolean;
  handedOver: boolean;
  handoverReason: string | null;
  errorBanner: string | null;
  pendingQueue: string[];
}

export function initialState(): ViewState {
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

function append(state: ViewState, entry: TranscriptEntry): ViewState {
  return { ...state, transcript: [...state.transcript, entry] };
}

export function sessionOpened(state: ViewState, sessionId: string, greeting: string): ViewState {
  const next = { ...state, sessionId, errorBanner: null };
  return append(next, { speaker: "bot", text: greeting, agentName: "", pending: false });
}

export function sessionResumed(state: ViewState, sessionId: string, agentName: string,
                               context: SessionContext, handedOver: boolean): ViewState {
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

export function userMessageSent(state: ViewState, text: string): ViewState {
  return append(state, { speaker: "user", text, agentName: "", pending: false });
}

export function userMessageQueued(state: ViewState, text: string): ViewState {
  const next = { ...state, pendingQueue: [...state.pendingQueue, text] };
  return append(next, { speaker: "user", text, agentName: "", pending: true });
}

export function queueFlushed(state: ViewState): ViewState {
  return {
    ...state,
    pendingQueue: [],
    transcript: state.transcript.map((entry) => (entry.pending ? { ...entry, pending: false } : entry)),
  };
}

export function botMessageReceived(state: ViewState, frame: BotMessageFrame): ViewState {
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

export function handoverReceived(state: ViewState, reason: string): ViewState {
  return { ...state, handedOver: true, handoverReason: reason };
}

export function contextUpdated(state: ViewState, context: SessionContext): ViewState {
  return { ...state, context };
}

export function connectionChanged(state: ViewState, connection: Connection, banner?: string): ViewState {
  return { ...state, connection, errorBanner: banner ?? (connection === "closed" ? state.errorBanner : null) };
}

export function connectionFailed(state: ViewState, message: string): ViewState {
  return { ...state, connection: "closed", errorBanner: message };
}

export function traceToggled(state: ViewState): ViewState {
  return { ...state, showTrace: !state.showTrace };
}
