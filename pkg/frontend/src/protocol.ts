// Wire types for the gateway's HTTP and WebSocket protocol. This file is
// the console's entire knowledge of the server; nothing else is assumed.

export interface TraceItem {
  agent_id: string;
  disposition: string;
  confidence: number;
  latency_ms: number;
}

export interface BotMessageFrame {
  type: "bot_message";
  reply: string;
  agent_id: string | null;
  agent_name: string;
  disposition: string;
  handover: boolean;
  trace: TraceItem[];
}

export interface HandoverFrame {
  type: "handover";
  reason: string;
}

export interface ErrorFrame {
  type: "error";
  code: string;
}

export type ServerFrame = BotMessageFrame | HandoverFrame | ErrorFrame;

export interface UserMessageFrame {
  type: "user_message";
  text: string;
}

export interface SessionCreated {
  session_id: string;
  greeting: string;
}

export interface SessionContext {
  intents: string[];
  entities: Record<string, string>;
}

export interface SessionRecord {
  session_id: string;
  app_id: string;
  user_id: string;
  channel_id: string;
  serving_agent_id: string | null;
  context: SessionContext;
  consecutive_oos: number;
  last_sentiment: number;
  status: string;
  created_at: number;
  updated_at: number;
}

export interface AgentRow {
  agent_id: string;
  name: string;
  version: string;
  node_type: string;
  status: string;
  agent_class: string;
  rating: string;
  avg_response_time_ms: number;
}

export function parseServerFrame(data: string): ServerFrame | null {
  try {
    const frame = JSON.parse(data);
    if (frame && (frame.type === "bot_message" || frame.type === "handover" || frame.type === "error")) {
      return frame as ServerFrame;
    }
  } catch {
    // fall through: unparseable frames are dropped, never rendered
  }
  return null;
}
