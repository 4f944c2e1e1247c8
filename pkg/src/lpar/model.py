"""Domain data shared across the bus, stores, selection and agents."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Disposition(str, Enum):
    IN_SCOPE = "in_scope"
    OUT_OF_SCOPE = "out_of_scope"
    HANDOVER_REQUEST = "handover_request"


class Rating(str, Enum):
    BEGINNER = "Beginner"
    INTERMEDIATE = "Intermediate"
    PROFESSIONAL = "Professional"
    EXPERT = "Expert"


# Ordering used by tie-breaks; weights used by the rating_weighted policy.
RATING_ORDER = {
    Rating.BEGINNER: 0,
    Rating.INTERMEDIATE: 1,
    Rating.PROFESSIONAL: 2,
    Rating.EXPERT: 3,
}
RATING_WEIGHT = {
    Rating.BEGINNER: 0.25,
    Rating.INTERMEDIATE: 0.5,
    Rating.PROFESSIONAL: 0.75,
    Rating.EXPERT: 1.0,
}


class AgentClass(str, Enum):
    CONVERSATIONAL = "conversational"
    FAQ = "faq"
    QUESTION_ANSWER = "question_answer"
    SEMANTIC_SEARCH = "semantic_search"
    KNOWLEDGE_GRAPH = "knowledge_graph"
    NOT_APPLICABLE = "not_applicable"


class NodeType(str, Enum):
    AGENT = "agent"
    POD = "pod"


class ConnectionProtocol(str, Enum):
    IN_PROCESS = "in_process"
    EXTERNAL_ADAPTER = "external_adapter"


class AgentScope(str, Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


class AgentStatus(str, Enum):
    ONLINE = "online"
    OFFLINE = "offline"


@dataclass
class AgentResponse:
    """One agent's verdict on one query."""

    agent_id: str
    query_id: str
    session_id: str
    disposition: Disposition
    confidence: float
    reply_text: str = ""
    intent: str | None = None
    entities: dict[str, str] = field(default_factory=dict)
    latency_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "query_id": self.query_id,
            "session_id": self.session_id,
            "disposition": self.disposition.value,
            "confidence": self.confidence,
            "intent": self.intent,
            "entities": dict(self.entities),
            "reply_text": self.reply_text,
            "latency_ms": self.latency_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentResponse":
        return cls(
            agent_id=d["agent_id"],
            query_id=d["query_id"],
            session_id=d["session_id"],
            disposition=Disposition(d["disposition"]),
            confidence=d["confidence"],
            intent=d.get("intent"),
            entities=dict(d.get("entities") or {}),
            reply_text=d.get("reply_text", ""),
            latency_ms=d.get("latency_ms", 0.0),
        )


MAX_CONTEXT_INTENTS = 50
MAX_CONTEXT_ENTITIES = 100


@dataclass
class ContextSnapshot:
    """Intents and entities accumulated over a session, most recent last.

    Bounded: oldest intents and oldest entity keys are evicted past the
    caps so long sessions cannot grow without limit.
    """

    intents: list[str] = field(default_factory=list)
    entities: dict[str, str] = field(default_factory=dict)

    def merge(self, intents: list[str], entities: dict[str, str]) -> None:
        self.intents.extend(intents)
        if len(self.intents) > MAX_CONTEXT_INTENTS:
            del self.intents[: len(self.intents) - MAX_CONTEXT_INTENTS]
        for key, value in entities.items():
            # Re-writing a key refreshes its recency.
            self.entities.pop(key, None)
            self.entities[key] = value
        while len(self.entities) > MAX_CONTEXT_ENTITIES:
            self.entities.pop(next(iter(self.entities)))

    def copy(self) -> "ContextSnapshot":
        return ContextSnapshot(list(self.intents), dict(self.entities))

    def to_dict(self) -> dict:
        return {"intents": list(self.intents), "entities": dict(self.entities)}

    @classmethod
    def from_dict(cls, d: dict) -> "ContextSnapshot":
        return cls(list(d.get("intents") or []), dict(d.get("entities") or {}))
