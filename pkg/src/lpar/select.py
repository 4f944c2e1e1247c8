"""Agent election: scatter strategies plus response selection policies.

Two strategies. Broadcast-only scatters the query to every member of the
scope and gathers replies until the window closes on the logical clock or
every online member has answered. Search-and-multicast first ranks scope
members by centroid similarity, invites the top k onto a per-query
multicast topic, scatters only to them, then tears the topic down; when
the search yields no candidates it falls back to broadcast-only.

Three policies disambiguate among in-scope responses:
  highest_confidence  max confidence; ties by rating, then latency, then id
  rating_weighted     max confidence * rating weight; ties as above
  fastest_eligible    min latency among confidence >= 0.5, else delegate
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bus import Control, ControlCommand, Envelope, MessageBus, Query, Response, TopicId, TopicKind
from .clock import LogicalClock
from .embed import Embedding
from .model import AgentResponse, ContextSnapshot, Disposition, Rating, RATING_ORDER, RATING_WEIGHT
from .registry import AgentStatus, NodeType, Registry, UnknownAgent
from .stores import QueryCacheEntry, Stores


class SelectError(Exception):
    pass


class UnknownScope(SelectError):
    pass


class UnknownPolicy(SelectError):
    pass


BROADCAST_ONLY = "broadcast_only"
SEARCH_AND_MULTICAST = "search_and_multicast"

POLICY_HIGHEST_CONFIDENCE = "highest_confidence"
POLICY_RATING_WEIGHTED = "rating_weighted"
POLICY_FASTEST_ELIGIBLE = "fastest_eligible"

_POLICY_ALIASES = {
    "p1": POLICY_HIGHEST_CONFIDENCE,
    "p2": POLICY_RATING_WEIGHTED,
    "p3": POLICY_FASTEST_ELIGIBLE,
}

FASTEST_ELIGIBLE_MIN_CONFIDENCE = 0.5

DEFAULT_GATHER_WINDOW_MS = 2000
DEFAULT_K = 3
DEFAULT_SIMILARITY_FLOOR = 0.1


def normalize_policy(policy: str) -> str:
    canonical = _POLICY_ALIASES.get(policy.lower(), policy)
    if canonical not in (POLICY_HIGHEST_CONFIDENCE, POLICY_RATING_WEIGHTED, POLICY_FASTEST_ELIGIBLE):
        raise UnknownPolicy(policy)
    return canonical


def apply_policy(
    policy: str,
    candidates: list[AgentResponse],
    ratings: dict[str, Rating],
) -> AgentResponse | None:
    """Pick one winner among in-scope candidates; None when there are none."""
    policy = normalize_policy(policy)
    if not candidates:
        return None

    def rank_of(response: AgentResponse) -> int:
        return RATING_ORDER.get(ratings.get(response.agent_id, Rating.BEGINNER), 0)

    if policy == POLICY_HIGHEST_CONFIDENCE:
        return min(candidates, key=lambda r: (-r.confidence, -rank_of(r), r.latency_ms, r.agent_id))
    if policy == POLICY_RATING_WEIGHTED:
        def weighted(response: AgentResponse) -> float:
            return response.confidence * RATING_WEIGHT.get(
                ratings.get(response.agent_id, Rating.BEGINNER), RATING_WEIGHT[Rating.BEGINNER]
            )
        return min(candidates, key=lambda r: (-weighted(r), -rank_of(r), r.latency_ms, r.agent_id))
    eligible = [r for r in candidates if r.confidence >= FASTEST_ELIGIBLE_MIN_CONFIDENCE]
    if not eligible:
        return apply_policy(POLICY_HIGHEST_CONFIDENCE, candidates, ratings)
    return min(eligible, key=lambda r: (r.latency_ms, -r.confidence, -rank_of(r), r.agent_id))


@dataclass
class SelectionRequest:
    query_id: str
    session_id: str
    utterance: str
    embedding: Embedding
    scope_id: str  # app id (top level members) or pod id (pod members)
    strategy: str = SEARCH_AND_MULTICAST
    gather_window_ms: int = DEFAULT_GATHER_WINDOW_MS
    k: int = DEFAULT_K
    similarity_floor: float = DEFAULT_SIMILARITY_FLOOR
    policy: str = POLICY_HIGHEST_CONFIDENCE
    channel_id: str | None = None
    context: ContextSnapshot = field(default_factory=ContextSnapshot)
    # Responses collected before this round (e.g. the bound agent bowing
    # out) are carried into the query-cache entry for a complete audit.
    preamble_responses: list[AgentResponse] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.gather_window_ms <= 0:
            raise ValueError("gather_window_ms must be > 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class SelectionOutcome:
    winner: tuple[str, AgentResponse] | None
    gathered: list[AgentResponse]
    strategy_executed: str
    fallback_used: bool = False


class Selector:
    """Runs selection rounds over the bus and logs them to the query cache."""

    def __init__(self, bus: MessageBus, registry: Registry, stores: Stores, clock: LogicalClock) -> None:
        self._bus = bus
        self._registry = registry
        self._stores = stores
        self._clock = clock

    def run(self, request: SelectionRequest, record: bool = True) -> SelectionOutcome:
        if request.strategy == BROADCAST_ONLY:
            outcome = self.select_broadcast_only(request)
        elif request.strategy == SEARCH_AND_MULTICAST:
            outcome = self.select_search_multicast(request)
        else:
            raise SelectError(f"unknown strategy {request.strategy}")
        if record:
            self._record(request, outcome)
        return outcome

    def ask_agent(
        self,
        agent_id: str,
        query_id: str,
        session_id: str,
        utterance: str,
        context: ContextSnapshot,
        window_ms: int = DEFAULT_GATHER_WINDOW_MS,
    ) -> AgentResponse | None:
        """Forward one query on an agent's private request topic and wait
        for its correlated response; None when the window closes unanswered."""
        try:
            descriptor = self._registry.descriptor(agent_id)
        except UnknownAgent:
            return None
        request_topic = self._bus.topic(descriptor.private_request_topic)
        response_topic = self._bus.topic(descriptor.private_response_topic)
        envelope = self._bus.make_envelope(
            topic=request_topic,
            sender_id="csa",
            payload=Query(utterance, context.copy()),
            correlation_id=query_id,
            session_id=session_id,
        )
        gathered = self._gather(
            publish_topic=request_topic,
            listen_topic=response_topic,
            envelope=envelope,
            query_id=query_id,
            expected=1,
            window_ms=window_ms,
        )
        return gathered[0] if gathered else None

    # -- strategies --------------------------------------------------------

    def select_broadcast_only(self, request: SelectionRequest) -> SelectionOutcome:
        request_topic, response_topic = self._resolve_scope(request.scope_id)
        expected = self._online_member_count(request.scope_id)
        envelope = self._bus.make_envelope(
            topic=request_topic,
            sender_id="csa",
            payload=Query(request.utterance, request.context.copy()),
            correlation_id=request.query_id,
            session_id=request.session_id,
        )
        gathered = self._gather(
            publish_topic=request_topic,
            listen_topic=response_topic,
            envelope=envelope,
            query_id=request.query_id,
            expected=expected,
            window_ms=request.gather_window_ms,
        )
        winner = self._pick(request, gathered)
        return SelectionOutcome(winner=winner, gathered=gathered, strategy_executed=BROADCAST_ONLY)

    def select_search_multicast(self, request: SelectionRequest) -> SelectionOutcome:
        candidates = self._registry.rank_members(
            request.scope_id, request.embedding, request.k, request.similarity_floor, request.channel_id
        )
        if not candidates:
            outcome = self.select_broadcast_only(request)
            outcome.fallback_used = True
            return outcome
        # Pod-scoped rounds qualify the name so a pod electing for the same
        # query id never collides with the app-level multicast.
        if self._registry.is_pod(request.scope_id):
            topic_name = f"mc/{request.scope_id}/{request.query_id}"
        else:
            topic_name = f"mc/{request.query_id}"
        mc_topic = self._bus.create_topic(TopicKind.MULTICAST, topic_name)
        for agent_id, _similarity in candidates:
            self._send_control(agent_id, ControlCommand.SUBSCRIBE_MULTICAST, mc_topic.name, request)
        # Deliver the subscribe controls before the scatter so every
        # candidate is on the topic at publish time.
        self._bus.run_until_idle(deadline_ms=self._clock.now_ms)
        envelope = self._bus.make_envelope(
            topic=mc_topic,
            sender_id="csa",
            payload=Query(request.utterance, request.context.copy()),
            correlation_id=request.query_id,
            session_id=request.session_id,
        )
        gathered = self._gather(
            publish_topic=mc_topic,
            listen_topic=mc_topic,
            envelope=envelope,
            query_id=request.query_id,
            expected=len(candidates),
            window_ms=request.gather_window_ms,
        )
        self._bus.teardown_topic(mc_topic)
        winner = self._pick(request, gathered)
        return SelectionOutcome(winner=winner, gathered=gathered, strategy_executed=SEARCH_AND_MULTICAST)

    # -- internals ------------------------------------------------------------

    def _resolve_scope(self, scope_id: str) -> tuple[TopicId, TopicId]:
        try:
            return self._registry.scope_topics(scope_id)
        except Exception as exc:
            raise UnknownScope(scope_id) from exc

    def _online_member_count(self, scope_id: str) -> int:
        return sum(1 for d in self._registry.scope_members(scope_id) if d.status is AgentStatus.ONLINE)

    def _send_control(self, agent_id: str, command: ControlCommand, argument: str, request: SelectionRequest) -> None:
        descriptor = self._registry.descriptor(agent_id)
        topic = self._bus.topic(descriptor.private_request_topic)
        envelope = self._bus.make_envelope(
            topic=topic,
            sender_id="csa",
            payload=Control(command, argument),
            correlation_id=request.query_id,
            session_id=request.session_id,
        )
        self._bus.publish(topic, envelope)

    def _gather(
        self,
        publish_topic: TopicId,
        listen_topic: TopicId,
        envelope: Envelope,
        query_id: str,
        expected: int,
        window_ms: int,
    ) -> list[AgentResponse]:
        """Scatter one query and collect correlated responses until the
        window elapses or all expected responders have answered. Responses
        arriving after the window are never observed: the subscription is
        detached before returning, so a late delivery is dropped."""
        sub = self._bus.subscribe(listen_topic, f"gather/{query_id}")
        deadline = self._clock.now_ms + window_ms
        self._bus.publish(publish_topic, envelope)
        responses: list[AgentResponse] = []
        responders: set[str] = set()
        while True:
            for received in sub.drain():
                if not isinstance(received.payload, Response):
                    continue
                if received.correlation_id != query_id:
                    continue
                response = received.payload.response
                if response.agent_id in responders:
                    continue
                responders.add(response.agent_id)
                responses.append(response)
            if expected and len(responders) >= expected:
                break
            if not self._bus.step(deadline_ms=deadline):
                self._clock.advance_to(deadline)
                break
        sub.unsubscribe()
        for response in responses:
            try:
                self._registry.record_latency(response.agent_id, response.latency_ms)
            except UnknownAgent:
                pass
        return responses

    def _eligible_candidates(self, request: SelectionRequest, gathered: list[AgentResponse]) -> list[AgentResponse]:
        app_id = (
            request.scope_id
            if not self._registry.is_registered(request.scope_id)
            else self._registry.app_of(request.scope_id)
        )
        allowed = self._registry.allowed_classes(app_id, request.channel_id)
        out = []
        for response in gathered:
            if response.disposition is not Disposition.IN_SCOPE:
                continue
            try:
                descriptor = self._registry.descriptor(response.agent_id)
            except UnknownAgent:
                continue
            if descriptor.node_type is NodeType.POD or allowed is None or descriptor.agent_class in allowed:
                out.append(response)
        return out

    def _pick(self, request: SelectionRequest, gathered: list[AgentResponse]) -> tuple[str, AgentResponse] | None:
        candidates = self._eligible_candidates(request, gathered)
        ratings = {r.agent_id: self._safe_rating(r.agent_id) for r in candidates}
        winner = apply_policy(request.policy, candidates, ratings)
        if winner is None:
            return None
        return winner.agent_id, winner

    def _safe_rating(self, agent_id: str) -> Rating:
        try:
            return self._registry.descriptor(agent_id).rating
        except UnknownAgent:
            return Rating.BEGINNER

    def _record(self, request: SelectionRequest, outcome: SelectionOutcome) -> None:
        entry = QueryCacheEntry(
            query_id=request.query_id,
            session_id=request.session_id,
            utterance_stored=request.utterance,
            embedding=request.embedding,
            strategy=outcome.strategy_executed,
            gathered=list(request.preamble_responses) + list(outcome.gathered),
            selected_agent_id=None,
            policy_used=normalize_policy(request.policy),
        )
        self._stores.log_query(entry)
        if outcome.winner is not None:
            self._stores.set_selected(request.query_id, outcome.winner[0])
