"""Agent adapter contract, mock agent kit, and the pod coordinator.

Adapters are the only components that know an implementation's native
message shape; everything an implementation does (answer, refuse, time
out, crash) is normalized into one well-formed AgentResponse. Two vendor
styles ship here to keep the platform honest about being protocol
agnostic: a dict-in/dict-out style and a scored-fulfillment style.

The kit reproduces a small retail-banking fleet: goal-oriented
slot-filling bots, an FAQ bot doing nearest-neighbour lookup over
question embeddings, a deliberately low-confidence semantic search bot
(the broad fallback), a human-connect bot that only engages once a
session has been handed over, and a scripted responder for harnesses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .bus import Control, ControlCommand, Envelope, MessageBus, Query, Response, Subscription
from .clock import LogicalClock
from .embed import Embedding, cosine, embed_text
from .model import AgentResponse, AgentStatus, ContextSnapshot, Disposition
from .registry import Registry, UnknownAgent, private_topic_names


class AgentError(Exception):
    pass


class EmptyCorpus(AgentError):
    pass


class AdapterTimeout(AgentError):
    pass


# An implementation that takes longer than this (logical ms) is treated as
# out of scope rather than stalling the gather window (which is 2000 ms).
DEFAULT_ADAPTER_BUDGET_MS = 1500

IDENTIFY_PHRASES = ("who are you", "what is your name", "what are you")
IDENTIFY_INTENT = "identify_yourself"


def _normalize(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", " ", text.lower()).strip()


def _is_identify(utterance: str) -> bool:
    norm = _normalize(utterance)
    return any(phrase in norm for phrase in IDENTIFY_PHRASES)


def _resolve_reply_topic(bus: MessageBus, agent_id: str, envelope: Envelope):
    """Where a response to this envelope belongs: broadcast requests pair
    with broadcast responses, private requests with the agent's private
    response topic, multicast answers flow on the multicast topic itself."""
    name = envelope.topic.name
    if name.endswith("/bcast/req"):
        return bus.topic(name[: -len("/req")] + "/resp")
    req_name, resp_name = private_topic_names(agent_id)
    if name == req_name:
        return bus.topic(resp_name)
    return envelope.topic


# ---------------------------------------------------------------------------
# Adapter layer
# ---------------------------------------------------------------------------


class BaseAdapter:
    """Topic plumbing plus outcome normalization, shared by both vendor styles."""

    def __init__(
        self,
        agent_id: str,
        bus: MessageBus,
        registry: Registry,
        clock: LogicalClock,
        budget_ms: int = DEFAULT_ADAPTER_BUDGET_MS,
    ) -> None:
        self.agent_id = agent_id
        self._bus = bus
        self._registry = registry
        self._clock = clock
        self._budget_ms = budget_ms
        self._multicast_subs: dict[str, Subscription] = {}
        self._shutdown = False

    # Subclasses translate to and from the implementation's native shape.
    def _call_implementation(self, utterance: str, context: ContextSnapshot, session_id: str) -> dict:
        raise NotImplementedError

    def handle(self, envelope: Envelope) -> None:
        if self._shutdown:
            return
        payload = envelope.payload
        if isinstance(payload, Control):
            self._handle_control(payload)
            return
        if not isinstance(payload, Query):
            return  # responses from peers on shared topics are not ours to answer
        if self._status() is not AgentStatus.ONLINE:
            return
        response = self._respond(envelope, payload)
        reply_topic = self._reply_topic(envelope)
        out = self._bus.make_envelope(
            topic=reply_topic,
            sender_id=self.agent_id,
            payload=Response(response),
            correlation_id=envelope.correlation_id,
            session_id=envelope.session_id,
        )
        self._bus.publish(reply_topic, out, delay_ms=int(response.latency_ms))

    def _status(self) -> AgentStatus:
        try:
            return self._registry.descriptor(self.agent_id).status
        except UnknownAgent:
            return AgentStatus.OFFLINE

    def _handle_control(self, control: Control) -> None:
        if control.command is ControlCommand.SUBSCRIBE_MULTICAST:
            if control.argument not in self._multicast_subs and self._bus.has_topic(control.argument):
                topic = self._bus.topic(control.argument)
                self._multicast_subs[control.argument] = self._bus.subscribe(
                    topic, self.agent_id, self.handle
                )
        elif control.command is ControlCommand.UNSUBSCRIBE_MULTICAST:
            sub = self._multicast_subs.pop(control.argument, None)
            if sub is not None:
                sub.unsubscribe()
        elif control.command is ControlCommand.SHUTDOWN:
            self._shutdown = True
            for sub in self._multicast_subs.values():
                sub.unsubscribe()
            self._multicast_subs.clear()

    def _reply_topic(self, envelope: Envelope):
        return _resolve_reply_topic(self._bus, self.agent_id, envelope)

    def _respond(self, envelope: Envelope, query: Query) -> AgentResponse:
        started = self._clock.now_ms
        try:
            verdict = self._call_implementation(query.utterance, query.context, envelope.session_id)
            latency = float(verdict.pop("_elapsed_ms", 0.0))
            if latency > self._budget_ms:
                raise AdapterTimeout(f"{latency}ms > {self._budget_ms}ms")
        except AdapterTimeout:
            return AgentResponse(
                agent_id=self.agent_id,
                query_id=envelope.correlation_id,
                session_id=envelope.session_id,
                disposition=Disposition.OUT_OF_SCOPE,
                confidence=0.0,
                latency_ms=float(self._budget_ms),
            )
        except Exception:
            # Malformed implementations degrade to a silent refusal.
            return AgentResponse(
                agent_id=self.agent_id,
                query_id=envelope.correlation_id,
                session_id=envelope.session_id,
                disposition=Disposition.OUT_OF_SCOPE,
                confidence=0.0,
                latency_ms=float(self._clock.now_ms - started),
            )
        return AgentResponse(
            agent_id=self.agent_id,
            query_id=envelope.correlation_id,
            session_id=envelope.session_id,
            disposition=verdict.get("disposition", Disposition.OUT_OF_SCOPE),
            confidence=verdict.get("confidence", 0.5),
            intent=verdict.get("intent"),
            entities=dict(verdict.get("entities") or {}),
            reply_text=verdict.get("reply_text", ""),
            latency_ms=latency,
        )


class JsonIntentAdapter(BaseAdapter):
    """Vendor style A: respond(text, context_dict, conversation_id) returning
    {in_scope, intent, confidence, entities, reply} plus processing_ms."""

    def __init__(self, agent_id, implementation, bus, registry, clock, budget_ms=DEFAULT_ADAPTER_BUDGET_MS):
        super().__init__(agent_id, bus, registry, clock, budget_ms)
        self._impl = implementation

    def _call_implementation(self, utterance: str, context: ContextSnapshot, session_id: str) -> dict:
        native = self._impl.respond(utterance, context.to_dict(), session_id)
        in_scope = bool(native.get("in_scope", False))
        confidence = native.get("confidence")
        return {
            "disposition": Disposition.IN_SCOPE if in_scope else Disposition.OUT_OF_SCOPE,
            "confidence": 0.5 if confidence is None else float(confidence),
            "intent": native.get("intent"),
            "entities": native.get("entities") or {},
            "reply_text": native.get("reply") or "",
            "_elapsed_ms": float(native.get("processing_ms", 0.0)),
        }


class ScoredFulfillmentAdapter(BaseAdapter):
    """Vendor style B: invoke({"query", "context", "conversation"}) returning
    {"fulfillment": {"text"}, "score": 0-100, "fallback": bool, "parameters",
    "intent_name", "took_ms"}."""

    def __init__(self, agent_id, implementation, bus, registry, clock, budget_ms=DEFAULT_ADAPTER_BUDGET_MS):
        super().__init__(agent_id, bus, registry, clock, budget_ms)
        self._impl = implementation

    def _call_implementation(self, utterance: str, context: ContextSnapshot, session_id: str) -> dict:
        native = self._impl.invoke(
            {"query": utterance, "context": context.to_dict(), "conversation": session_id}
        )
        fallback = bool(native.get("fallback", True))
        score = native.get("score")
        return {
            "disposition": Disposition.OUT_OF_SCOPE if fallback else Disposition.IN_SCOPE,
            "confidence": 0.5 if score is None else float(score) / 100.0,
            "intent": native.get("intent_name"),
            "entities": native.get("parameters") or {},
            "reply_text": (native.get("fulfillment") or {}).get("text", ""),
            "_elapsed_ms": float(native.get("took_ms", 0.0)),
        }


# ---------------------------------------------------------------------------
# Goal-oriented slot filling
# ---------------------------------------------------------------------------


@dataclass
class Slot:
    name: str
    prompt: str
    validator: str = "any"  # any | digits | number
    value: str | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "prompt": self.prompt, "validator": self.validator, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "Slot":
        return cls(d["name"], d["prompt"], d.get("validator", "any"), d.get("value"))


@dataclass
class SlotFrame:
    intent: str
    slots: list[Slot] = field(default_factory=list)
    state: str = "collecting"  # collecting | confirming | fulfilled

    def next_unfilled(self) -> Slot | None:
        for slot in self.slots:
            if slot.value is None:
                return slot
        return None

    def values(self) -> dict[str, str]:
        return {s.name: s.value for s in self.slots if s.value is not None}

    def to_dict(self) -> dict:
        return {"intent": self.intent, "slots": [s.to_dict() for s in self.slots], "state": self.state}

    @classmethod
    def from_dict(cls, d: dict) -> "SlotFrame":
        return cls(d["intent"], [Slot.from_dict(s) for s in d.get("slots") or []], d.get("state", "collecting"))


_VALIDATORS: dict[str, Callable[[str], bool]] = {
    "any": lambda text: bool(text.strip()),
    "digits": lambda text: bool(re.fullmatch(r"\d+", text.strip())),
    "number": lambda text: bool(re.fullmatch(r"\d+(?:\.\d+)?", text.strip())),
}


@dataclass
class IntentSpec:
    name: str
    keywords: list[str]
    slots: list[Slot] = field(default_factory=list)
    fulfillment: str = "Done."

    def fresh_slots(self) -> list[Slot]:
        return [Slot(s.name, s.prompt, s.validator) for s in self.slots]


def goal_agent_step(
    frame: SlotFrame | None,
    utterance: str,
    context: ContextSnapshot,
    intents: Sequence[IntentSpec],
    agent_name: str,
) -> tuple[dict, SlotFrame | None]:
    """One turn of a goal-oriented dialog; pure apart from the frame handed
    back for the caller to keep. Returns a native vendor-A verdict dict."""
    if _is_identify(utterance):
        return (
            {
                "in_scope": True,
                "intent": IDENTIFY_INTENT,
                "confidence": 0.95,
                "entities": {},
                "reply": f"I am {agent_name}.",
            },
            frame,
        )

    norm = _normalize(utterance)

    def detect() -> IntentSpec | None:
        best: IntentSpec | None = None
        best_hits = 0
        for spec in intents:
            hits = sum(1 for kw in spec.keywords if kw in norm)
            if hits > best_hits:
                best, best_hits = spec, hits
        return best

    def start(spec: IntentSpec) -> SlotFrame:
        new = SlotFrame(intent=spec.name, slots=spec.fresh_slots())
        for slot in new.slots:
            # Context carry-over: entities supplied earlier in the session
            # fill matching slots without re-prompting.
            if slot.name in context.entities:
                slot.value = context.entities[slot.name]
        return new

    if frame is not None and frame.state == "collecting":
        pending = frame.next_unfilled()
        if pending is not None and _VALIDATORS[pending.validator](utterance):
            pending.value = utterance.strip()
        else:
            switched = detect()
            if switched is None:
                return ({"in_scope": False, "confidence": 0.0, "reply": ""}, frame)
            frame = start(switched)
    else:
        spec = detect()
        if spec is None:
            return ({"in_scope": False, "confidence": 0.0, "reply": ""}, frame)
        frame = start(spec)

    spec_by_name = {s.name: s for s in intents}
    pending = frame.next_unfilled()
    if pending is not None:
        reply = pending.prompt
    else:
        frame.state = "fulfilled"
        reply = spec_by_name[frame.intent].fulfillment.format(**frame.values())
    return (
        {
            "in_scope": True,
            "intent": frame.intent,
            "confidence": 0.9,
            "entities": frame.values(),
            "reply": reply,
        },
        frame,
    )


class GoalOrientedBot:
    """Vendor-A style implementation keeping one SlotFrame per conversation."""

    def __init__(self, name: str, intents: Sequence[IntentSpec], processing_ms: int = 20) -> None:
        self.name = name
        self.intents = list(intents)
        self.processing_ms = processing_ms
        self.frames: dict[str, SlotFrame] = {}

    def respond(self, text: str, context: dict, conversation_id: str) -> dict:
        frame = self.frames.get(conversation_id)
        verdict, frame = goal_agent_step(
            frame, text, ContextSnapshot.from_dict(context), self.intents, self.name
        )
        if frame is not None:
            self.frames[conversation_id] = frame
        verdict["processing_ms"] = self.processing_ms
        return verdict


# ---------------------------------------------------------------------------
# FAQ and semantic search
# ---------------------------------------------------------------------------


@dataclass
class FaqPair:
    question: str
    answer: str
    embedding: Embedding = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.embedding is None:
            self.embedding = embed_text(self.question)


FAQ_SIMILARITY_THRESHOLD = 0.35


def faq_agent_answer(pairs: Sequence[FaqPair], utterance: str, threshold: float = FAQ_SIMILARITY_THRESHOLD) -> dict:
    """Nearest-neighbour lookup over question embeddings; vendor-B verdict."""
    if not pairs:
        raise EmptyCorpus("faq corpus is empty")
    query = embed_text(utterance)
    best_pair = None
    best_sim = -2.0
    for pair in pairs:
        sim = cosine(query, pair.embedding)
        if sim > best_sim:
            best_pair, best_sim = pair, sim
    if best_sim >= threshold:
        return {
            "fallback": False,
            "score": best_sim * 100.0,
            "fulfillment": {"text": best_pair.answer},
            "intent_name": "faq_match",
            "parameters": {},
        }
    return {"fallback": True, "score": 0.0, "fulfillment": {"text": ""}}


class FaqBot:
    def __init__(self, name: str, pairs: Sequence[FaqPair], threshold: float = FAQ_SIMILARITY_THRESHOLD,
                 processing_ms: int = 15) -> None:
        if not pairs:
            raise EmptyCorpus("faq corpus is empty")
        self.name = name
        self.pairs = list(pairs)
        self.threshold = threshold
        self.processing_ms = processing_ms

    def invoke(self, payload: dict) -> dict:
        utterance = payload["query"]
        if _is_identify(utterance):
            native = {
                "fallback": False,
                "score": 95.0,
                "fulfillment": {"text": f"I am {self.name}."},
                "intent_name": IDENTIFY_INTENT,
            }
        else:
            native = faq_agent_answer(self.pairs, utterance, self.threshold)
        native["took_ms"] = self.processing_ms
        return native


SEARCH_SIMILARITY_FLOOR = 0.05
SEARCH_CONFIDENCE_DAMPING = 0.5


@dataclass
class SearchDocument:
    title: str
    body: str
    embedding: Embedding = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.embedding is None:
            text = f"{self.title} {self.body}".strip()
            self.embedding = embed_text(text)

    def snippet(self) -> str:
        body = self.body[:120]
        return f"{self.title}: {body}" if body else self.title


def search_agent_answer(corpus: Sequence[SearchDocument], utterance: str) -> dict:
    """Rank documents by cosine; confidence is damped so dedicated agents
    outrank search and it wins only as a fallback."""
    if not corpus:
        raise EmptyCorpus("search corpus is empty")
    query = embed_text(utterance)
    best_doc = None
    best_sim = -2.0
    for doc in corpus:
        sim = cosine(query, doc.embedding)
        if sim > best_sim:
            best_doc, best_sim = doc, sim
    if best_sim < SEARCH_SIMILARITY_FLOOR:
        return {"fallback": True, "score": 0.0, "fulfillment": {"text": ""}}
    return {
        "fallback": False,
        "score": SEARCH_CONFIDENCE_DAMPING * best_sim * 100.0,
        "fulfillment": {"text": best_doc.snippet()},
        "intent_name": "search_result",
        "parameters": {},
    }


class SearchBot:
    def __init__(self, name: str, corpus: Sequence[SearchDocument], processing_ms: int = 35) -> None:
        if not corpus:
            raise EmptyCorpus("search corpus is empty")
        self.name = name
        self.corpus = list(corpus)
        self.processing_ms = processing_ms

    def invoke(self, payload: dict) -> dict:
        utterance = payload["query"]
        if _is_identify(utterance):
            native = {
                "fallback": False,
                "score": 95.0,
                "fulfillment": {"text": f"I am {self.name}."},
                "intent_name": IDENTIFY_INTENT,
            }
        else:
            native = search_agent_answer(self.corpus, utterance)
        native["took_ms"] = self.processing_ms
        return native


# ---------------------------------------------------------------------------
# Human connect and scripted responders
# ---------------------------------------------------------------------------


class HumanConnectBot:
    """Stands in for a live-chat connector. In scope with full confidence
    only once the session has been handed over; invisible to normal
    elections otherwise."""

    def __init__(self, name: str, session_lookup: Callable[[str], object], processing_ms: int = 10) -> None:
        self.name = name
        self._session_lookup = session_lookup
        self.processing_ms = processing_ms

    def respond(self, text: str, context: dict, conversation_id: str) -> dict:
        try:
            session = self._session_lookup(conversation_id)
            handed_over = getattr(session, "status", None) is not None and session.status.value == "handed_over"
        except Exception:
            handed_over = False
        if not handed_over:
            return {"in_scope": False, "confidence": 0.0, "reply": "", "processing_ms": self.processing_ms}
        if _is_identify(text):
            reply = f"I am {self.name}, a human teammate."
        else:
            reply = "You are connected to a human agent now. A teammate is reading your conversation."
        return {
            "in_scope": True,
            "intent": IDENTIFY_INTENT if _is_identify(text) else "human_assist",
            "confidence": 1.0,
            "entities": {},
            "reply": reply,
            "processing_ms": self.processing_ms,
        }


class PodCoordinator:
    """Makes a group of agents look like one agent to its parent scope.

    Keeps an inner serving binding per session; on an inner out-of-scope
    it clears the binding and runs a selection round over the pod's own
    members (same strategy machinery, pod-scoped topics), relaying the
    winner upward under the pod's identity so the parent can bind the pod.
    """

    def __init__(
        self,
        pod_id: str,
        name: str,
        bus: MessageBus,
        registry: Registry,
        selector,
        clock: LogicalClock,
        strategy: str = "search_and_multicast",
        k: int = 3,
        similarity_floor: float = 0.1,
        policy: str = "highest_confidence",
        gather_window_ms: int = 2000,
        channel_lookup: Callable[[str], str | None] | None = None,
    ) -> None:
        self.pod_id = pod_id
        self.name = name
        self._bus = bus
        self._registry = registry
        self._selector = selector
        self._clock = clock
        self.strategy = strategy
        self.k = k
        self.similarity_floor = similarity_floor
        self.policy = policy
        self.gather_window_ms = gather_window_ms
        self._channel_lookup = channel_lookup
        self._inner_binding: dict[str, str] = {}
        self._multicast_subs: dict[str, Subscription] = {}

    def inner_binding(self, session_id: str) -> str | None:
        bound = self._inner_binding.get(session_id)
        if bound is not None and not self._registry.is_registered(bound):
            del self._inner_binding[session_id]
            return None
        return bound

    def handle(self, envelope: Envelope) -> None:
        payload = envelope.payload
        if isinstance(payload, Control):
            self._handle_control(payload)
            return
        if not isinstance(payload, Query):
            return
        if self._registry.descriptor(self.pod_id).status is not AgentStatus.ONLINE:
            return
        arrived = self._clock.now_ms
        inner = self._answer(envelope, payload)
        response = self._relay(envelope, inner)
        reply_topic = _resolve_reply_topic(self._bus, self.pod_id, envelope)
        out = self._bus.make_envelope(
            topic=reply_topic,
            sender_id=self.pod_id,
            payload=Response(response),
            correlation_id=envelope.correlation_id,
            session_id=envelope.session_id,
        )
        # The inner round may already have advanced the clock past the
        # winner's nominal arrival; never schedule into the past.
        target = arrived + int(response.latency_ms)
        self._bus.publish(reply_topic, out, delay_ms=max(0, target - self._clock.now_ms))

    def _handle_control(self, control: Control) -> None:
        if control.command is ControlCommand.SUBSCRIBE_MULTICAST:
            if control.argument not in self._multicast_subs and self._bus.has_topic(control.argument):
                topic = self._bus.topic(control.argument)
                self._multicast_subs[control.argument] = self._bus.subscribe(topic, self.pod_id, self.handle)
        elif control.command is ControlCommand.UNSUBSCRIBE_MULTICAST:
            sub = self._multicast_subs.pop(control.argument, None)
            if sub is not None:
                sub.unsubscribe()

    def _answer(self, envelope: Envelope, query: Query) -> AgentResponse | None:
        session_id = envelope.session_id
        bound = self.inner_binding(session_id)
        if bound is not None:
            response = self._selector.ask_agent(
                bound, envelope.correlation_id, session_id, query.utterance, query.context,
                self.gather_window_ms,
            )
            if response is not None and response.disposition is Disposition.IN_SCOPE:
                return response
            del self._inner_binding[session_id]
        # Local import keeps module layering one-way (select knows nothing
        # about agents).
        from .select import SelectionRequest

        channel = self._channel_lookup(session_id) if self._channel_lookup else None
        outcome = self._selector.run(
            SelectionRequest(
                query_id=envelope.correlation_id,
                session_id=session_id,
                utterance=query.utterance,
                embedding=embed_text(query.utterance),
                scope_id=self.pod_id,
                strategy=self.strategy,
                gather_window_ms=self.gather_window_ms,
                k=self.k,
                similarity_floor=self.similarity_floor,
                policy=self.policy,
                channel_id=channel,
                context=query.context.copy(),
            ),
            record=False,
        )
        if outcome.winner is None:
            return None
        winner_id, response = outcome.winner
        self._inner_binding[session_id] = winner_id
        return response

    def _relay(self, envelope: Envelope, inner: AgentResponse | None) -> AgentResponse:
        if inner is None:
            return AgentResponse(
                agent_id=self.pod_id,
                query_id=envelope.correlation_id,
                session_id=envelope.session_id,
                disposition=Disposition.OUT_OF_SCOPE,
                confidence=0.0,
                latency_ms=0.0,
            )
        return AgentResponse(
            agent_id=self.pod_id,
            query_id=envelope.correlation_id,
            session_id=envelope.session_id,
            disposition=inner.disposition,
            confidence=inner.confidence,
            intent=inner.intent,
            entities=dict(inner.entities),
            reply_text=inner.reply_text,
            latency_ms=inner.latency_ms,
        )


class ScriptedResponder:
    """Harness implementation with a fixed or callable verdict, used by the
    randomized selection experiments and the test suite."""

    def __init__(
        self,
        name: str,
        in_scope: bool = True,
        confidence: float = 0.5,
        reply: str = "",
        intent: str | None = None,
        entities: dict[str, str] | None = None,
        processing_ms: int = 10,
        script: Callable[[str], dict] | None = None,
    ) -> None:
        self.name = name
        self.in_scope = in_scope
        self.confidence = confidence
        self.reply = reply or f"{name} reporting."
        self.intent = intent
        self.entities = entities or {}
        self.processing_ms = processing_ms
        self.script = script

    def respond(self, text: str, context: dict, conversation_id: str) -> dict:
        if self.script is not None:
            verdict = dict(self.script(text))
            verdict.setdefault("processing_ms", self.processing_ms)
            return verdict
        return {
            "in_scope": self.in_scope,
            "intent": self.intent,
            "confidence": self.confidence,
            "entities": dict(self.entities),
            "reply": self.reply,
            "processing_ms": self.processing_ms,
        }
