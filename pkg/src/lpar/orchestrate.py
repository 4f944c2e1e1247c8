"""Front-line orchestration: the per-turn pipeline and handover logic.

The orchestrator owns no domain knowledge. Per turn it redacts a logging
copy, filters profanity from the copy agents see, scores sentiment,
checks handover triggers, honors routing rules, forwards to the bound
agent, re-selects when that agent bows out, and logs exactly one
query-cache entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .clock import LogicalClock
from .bus import MessageBus
from .embed import embed_text
from .filters import (
    DEFAULT_HANDOVER_PHRASES,
    DEFAULT_NEGATIVE,
    DEFAULT_POSITIVE,
    DEFAULT_PROFANITY,
    pii_redact,
    profanity_filter,
    sentiment_score,
)
from .model import AgentResponse, Disposition
from .registry import Registry, UnknownAgent
from .select import (
    DEFAULT_GATHER_WINDOW_MS,
    DEFAULT_K,
    DEFAULT_SIMILARITY_FLOOR,
    POLICY_HIGHEST_CONFIDENCE,
    SEARCH_AND_MULTICAST,
    SelectionRequest,
    Selector,
)
from .stores import (
    QueryCacheEntry,
    SessionClosed,
    SessionRecord,
    SessionStatus,
    Stores,
)

HANDOVER_REASON_EXPLICIT = "explicit_request"
HANDOVER_REASON_SENTIMENT = "negative_sentiment"
HANDOVER_REASON_OOS = "repeated_oos"
HANDOVER_REASON_AGENT = "agent_request"

DEFAULT_SENTIMENT_THRESHOLD = -0.5
DEFAULT_OOS_THRESHOLD = 3
DEFAULT_FALLBACK_MESSAGE = "I could not find anyone to help with that yet."
DEFAULT_GREETING = "Hello! How can I help you today?"

DIRECT_TO_BOUND = "direct_to_bound"


@dataclass
class AppSettings:
    """Per-app behavior knobs, loaded from the app config file."""

    app_id: str
    strategy: str = SEARCH_AND_MULTICAST
    k: int = DEFAULT_K
    similarity_floor: float = DEFAULT_SIMILARITY_FLOOR
    policy: str = POLICY_HIGHEST_CONFIDENCE
    gather_window_ms: int = DEFAULT_GATHER_WINDOW_MS
    sentiment_threshold: float = DEFAULT_SENTIMENT_THRESHOLD
    oos_threshold: int = DEFAULT_OOS_THRESHOLD
    handover_phrases: tuple[str, ...] = DEFAULT_HANDOVER_PHRASES
    fallback_message: str = DEFAULT_FALLBACK_MESSAGE
    greetings: dict[str, str] = field(default_factory=lambda: {"default": DEFAULT_GREETING})
    human_agent_id: str | None = None
    positive_lexicon: frozenset[str] = DEFAULT_POSITIVE
    negative_lexicon: frozenset[str] = DEFAULT_NEGATIVE
    profanity_lexicon: frozenset[str] = DEFAULT_PROFANITY


@dataclass
class TurnResult:
    reply_text: str
    agent_id: str | None
    agent_name: str
    disposition: Disposition
    trace: list[dict]
    handover: bool
    handover_reason: str | None = None

    def to_wire(self) -> dict:
        return {
            "reply": self.reply_text,
            "agent_id": self.agent_id,
            "agent_name": self.agent_name,
            "disposition": self.disposition.value,
            "handover": self.handover,
            "trace": self.trace,
        }


def _trace_item(response: AgentResponse) -> dict:
    return {
        "agent_id": response.agent_id,
        "disposition": response.disposition.value,
        "confidence": response.confidence,
        "latency_ms": response.latency_ms,
    }


class CustomerServiceAgent:
    def __init__(
        self,
        bus: MessageBus,
        registry: Registry,
        stores: Stores,
        selector: Selector,
        clock: LogicalClock,
    ) -> None:
        self._bus = bus
        self._registry = registry
        self._stores = stores
        self._selector = selector
        self._clock = clock
        self._settings: dict[str, AppSettings] = {}

    def configure_app(self, settings: AppSettings) -> None:
        self._settings[settings.app_id] = settings

    def settings_for(self, app_id: str) -> AppSettings:
        return self._settings.setdefault(app_id, AppSettings(app_id=app_id))

    # -- conversation surface ------------------------------------------------

    def greeting_for(self, app_id: str, persona_hint: str = "") -> str:
        greetings = self.settings_for(app_id).greetings
        return greetings.get(persona_hint or "default", greetings.get("default", DEFAULT_GREETING))

    def open_conversation(self, app_id: str, user_id: str, channel_id: str) -> tuple[SessionRecord, str]:
        """Resume the user's live session (re-homed onto this channel) or
        open a fresh one, so a dialog can hop channels mid-conversation."""
        profile = self._stores.find_user(user_id)
        persona = profile.persona_hint if profile is not None else ""
        existing = self._stores.find_active_session(app_id, user_id)
        if existing is not None:
            existing.channel_id = channel_id
            return existing, self.greeting_for(app_id, persona)
        session = self._stores.open_session(app_id, user_id, channel_id)
        return session, self.greeting_for(app_id, persona)

    # -- utility services (thin wrappers binding per-app lexicons) -------------

    def sentiment_score(self, app_id: str, text: str) -> float:
        settings = self.settings_for(app_id)
        return sentiment_score(text, settings.positive_lexicon, settings.negative_lexicon)

    def profanity_filter(self, app_id: str, text: str) -> tuple[str, bool]:
        return profanity_filter(text, self.settings_for(app_id).profanity_lexicon)

    # -- handover -----------------------------------------------------------

    def trigger_handover(self, session: SessionRecord, text: str) -> str | None:
        settings = self.settings_for(session.app_id)
        lowered = text.lower()
        if any(phrase in lowered for phrase in settings.handover_phrases):
            return HANDOVER_REASON_EXPLICIT
        if session.last_sentiment < settings.sentiment_threshold:
            return HANDOVER_REASON_SENTIMENT
        if session.consecutive_oos >= settings.oos_threshold:
            return HANDOVER_REASON_OOS
        return None

    def _hand_over(self, session: SessionRecord, reason: str) -> bool:
        """Bind the human-connect agent and flip the session; False when the
        app has no registered human-connect agent to receive it."""
        settings = self.settings_for(session.app_id)
        if settings.human_agent_id is None or not self._registry.is_registered(settings.human_agent_id):
            return False
        self._stores.bind_serving_agent(session.session_id, settings.human_agent_id)
        self._stores.set_status(session.session_id, SessionStatus.HANDED_OVER)
        return True

    # -- the turn pipeline -----------------------------------------------------

    def handle_turn(self, session_id: str, raw_text: str) -> TurnResult:
        session = self._stores.session(session_id)
        if session.status is SessionStatus.CLOSED:
            raise SessionClosed(session_id)
        settings = self.settings_for(session.app_id)

        redacted_text, _findings = pii_redact(raw_text)
        clean_text, _flagged = self.profanity_filter(session.app_id, raw_text)
        sentiment = self.sentiment_score(session.app_id, raw_text)
        self._stores.update_sentiment(session_id, sentiment)

        handover_reason: str | None = None
        if session.status is SessionStatus.ACTIVE:
            reason = self.trigger_handover(session, raw_text)
            if reason is not None and self._hand_over(session, reason):
                handover_reason = reason

        if session.status is SessionStatus.ACTIVE and session.serving_agent_id is None:
            rule = self._stores.routing_rule_for(session.user_id)
            if rule is not None:
                self._stores.bind_serving_agent(session_id, rule.preferred_agent_id)

        query_id = self._stores.allocate_query_id()
        embedding = embed_text(clean_text)
        trace: list[AgentResponse] = []
        winner: AgentResponse | None = None
        selection_logged = False

        bound = session.serving_agent_id
        if bound is not None:
            response = self._selector.ask_agent(
                bound, query_id, session_id, clean_text, session.context, settings.gather_window_ms
            )
            if response is None:
                response = AgentResponse(
                    agent_id=bound,
                    query_id=query_id,
                    session_id=session_id,
                    disposition=Disposition.OUT_OF_SCOPE,
                    confidence=0.0,
                    latency_ms=float(settings.gather_window_ms),
                )
            trace.append(response)
            if response.disposition is Disposition.IN_SCOPE:
                winner = response
            elif (
                response.disposition is Disposition.HANDOVER_REQUEST
                and session.status is SessionStatus.ACTIVE
                and self._hand_over(session, HANDOVER_REASON_AGENT)
            ):
                handover_reason = HANDOVER_REASON_AGENT
                winner = self._ask_human(session, query_id, clean_text, trace)
            else:
                self._stores.unbind(session_id)

        if winner is None and session.status is SessionStatus.ACTIVE:
            outcome = self._selector.run(
                SelectionRequest(
                    query_id=query_id,
                    session_id=session_id,
                    utterance=clean_text,
                    embedding=embedding,
                    scope_id=session.app_id,
                    strategy=settings.strategy,
                    gather_window_ms=settings.gather_window_ms,
                    k=settings.k,
                    similarity_floor=settings.similarity_floor,
                    policy=settings.policy,
                    channel_id=session.channel_id,
                    context=session.context,
                    preamble_responses=list(trace),
                )
            )
            selection_logged = True
            trace.extend(outcome.gathered)
            if outcome.winner is not None:
                winner_id, winner = outcome.winner
                self._stores.bind_serving_agent(session_id, winner_id)

        if winner is not None and winner.disposition is Disposition.IN_SCOPE:
            intents = [winner.intent] if winner.intent else []
            self._stores.merge_context(session_id, intents, winner.entities)
            self._stores.reset_oos(session_id)
        else:
            self._stores.increment_oos(session_id)
            # The turn that reaches the out-of-scope threshold hands over
            # immediately rather than waiting for one more query.
            if session.status is SessionStatus.ACTIVE:
                reason = self.trigger_handover(session, "")
                if reason is not None and self._hand_over(session, reason):
                    handover_reason = reason
                    winner = self._ask_human(session, query_id, clean_text, trace)
                    if winner is not None:
                        self._stores.reset_oos(session_id)

        if not selection_logged:
            entry = QueryCacheEntry(
                query_id=query_id,
                session_id=session_id,
                utterance_stored=clean_text,
                embedding=embedding,
                strategy=DIRECT_TO_BOUND,
                gathered=list(trace),
                selected_agent_id=winner.agent_id if winner is not None else None,
                policy_used=settings.policy,
            )
            self._stores.log_query(entry)

        if winner is not None:
            agent_name = self._agent_name(winner.agent_id)
            result = TurnResult(
                reply_text=winner.reply_text,
                agent_id=winner.agent_id,
                agent_name=agent_name,
                disposition=winner.disposition,
                trace=[_trace_item(r) for r in trace],
                handover=session.status is SessionStatus.HANDED_OVER,
                handover_reason=handover_reason,
            )
        else:
            result = TurnResult(
                reply_text=settings.fallback_message,
                agent_id=None,
                agent_name="",
                disposition=Disposition.OUT_OF_SCOPE,
                trace=[_trace_item(r) for r in trace],
                handover=session.status is SessionStatus.HANDED_OVER,
                handover_reason=handover_reason,
            )
        return result

    def _ask_human(self, session: SessionRecord, query_id: str, text: str, trace: list[AgentResponse]) -> AgentResponse | None:
        settings = self.settings_for(session.app_id)
        if session.serving_agent_id is None:
            return None
        response = self._selector.ask_agent(
            session.serving_agent_id, query_id, session.session_id, text, session.context,
            settings.gather_window_ms,
        )
        if response is not None:
            trace.append(response)
        return response

    def _agent_name(self, agent_id: str) -> str:
        try:
            return self._registry.descriptor(agent_id).name
        except UnknownAgent:
            return agent_id
