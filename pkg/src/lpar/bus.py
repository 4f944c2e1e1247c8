"""In-process publish/subscribe bus: broadcast, multicast, private topics.

Delivery is asynchronous through a discrete-event scheduler driven by the
injected logical clock: publish enqueues timed deliveries and returns, a
pump (`step`/`run_until_idle`) pops them in (time, sequence) order and
invokes subscriber handlers or fills subscriber inboxes. Everything the
bus ever delivered is recorded in `delivery_log` for test taps.

At-most-once, in-memory only. Publishing to a topic with no subscribers
silently drops the envelope. Multicast topics are torn down after each
gather and their names are never reused, so a late response from an old
round can never leak into a new one.
"""

from __future__ import annotations

import heapq
import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .clock import LogicalClock
from .model import AgentResponse, ContextSnapshot

logger = logging.getLogger(__name__)


class BusError(Exception):
    pass


class DuplicateTopic(BusError):
    pass


class UnknownTopic(BusError):
    pass


class TopicMismatch(BusError):
    pass


class NotMulticast(BusError):
    pass


class TopicKind(str, Enum):
    BROADCAST_REQUEST = "broadcast_request"
    BROADCAST_RESPONSE = "broadcast_response"
    MULTICAST = "multicast"
    PRIVATE_REQUEST = "private_request"
    PRIVATE_RESPONSE = "private_response"


@dataclass(frozen=True)
class TopicId:
    kind: TopicKind
    name: str


class ControlCommand(str, Enum):
    SUBSCRIBE_MULTICAST = "subscribe_multicast"
    UNSUBSCRIBE_MULTICAST = "unsubscribe_multicast"
    SHUTDOWN = "shutdown"


@dataclass(frozen=True)
class Query:
    utterance: str
    context: ContextSnapshot


@dataclass(frozen=True)
class Response:
    response: AgentResponse


@dataclass(frozen=True)
class Control:
    command: ControlCommand
    argument: str = ""


Payload = Query | Response | Control


@dataclass(frozen=True)
class Envelope:
    message_id: str
    correlation_id: str
    session_id: str
    topic: TopicId
    sender_id: str
    payload: Payload
    sent_at: int


Handler = Callable[[Envelope], None]


@dataclass
class Subscription:
    """Handle returned by subscribe; detach with `unsubscribe()`.

    Handler-less subscriptions accumulate envelopes in `inbox` for polling.
    """

    topic: TopicId
    participant_id: str
    handler: Handler | None
    bus: "MessageBus"
    active: bool = True
    inbox: deque[Envelope] = field(default_factory=deque)

    def unsubscribe(self) -> None:
        self.bus.unsubscribe(self)

    def drain(self) -> list[Envelope]:
        out = list(self.inbox)
        self.inbox.clear()
        return out


@dataclass(frozen=True)
class Delivery:
    at_ms: int
    topic: TopicId
    participant_id: str
    envelope: Envelope


class MessageBus:
    """Topic registry plus the delivery scheduler.

    Safe for concurrent publishers/subscribers (single re-entrant lock);
    the pump serializes handler execution, so each subscriber consumes
    from one logical consumer at a time.
    """

    def __init__(self, clock: LogicalClock) -> None:
        self.clock = clock
        self._lock = threading.RLock()
        self._topics: dict[str, TopicId] = {}
        self._subs: dict[str, list[Subscription]] = {}
        self._tombstones: set[str] = set()
        self._pending: list[tuple[int, int, Subscription, Envelope]] = []
        self._seq = 0
        self._msg_seq = 0
        self.delivery_log: list[Delivery] = []

    # -- topic lifecycle ---------------------------------------------------

    def create_topic(self, kind: TopicKind, name: str) -> TopicId:
        if not name:
            raise ValueError("topic name must be nonempty")
        with self._lock:
            if name in self._topics or name in self._tombstones:
                raise DuplicateTopic(name)
            topic = TopicId(kind, name)
            self._topics[name] = topic
            self._subs[name] = []
            return topic

    def has_topic(self, name: str) -> bool:
        with self._lock:
            return name in self._topics

    def topic(self, name: str) -> TopicId:
        with self._lock:
            try:
                return self._topics[name]
            except KeyError:
                raise UnknownTopic(name) from None

    def teardown_topic(self, topic: TopicId) -> None:
        with self._lock:
            existing = self._topics.get(topic.name)
            if existing is None:
                raise UnknownTopic(topic.name)
            if existing.kind is not TopicKind.MULTICAST:
                raise NotMulticast(topic.name)
            for sub in self._subs.pop(topic.name, []):
                sub.active = False
            del self._topics[topic.name]
            self._tombstones.add(topic.name)

    # -- subscriptions -----------------------------------------------------

    def subscribe(
        self, topic: TopicId, participant_id: str, handler: Handler | None = None
    ) -> Subscription:
        with self._lock:
            if topic.name not in self._topics:
                raise UnknownTopic(topic.name)
            sub = Subscription(topic=topic, participant_id=participant_id, handler=handler, bus=self)
            self._subs[topic.name].append(sub)
            return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            sub.active = False
            subs = self._subs.get(sub.topic.name)
            if subs and sub in subs:
                subs.remove(sub)

    def subscriber_count(self, topic: TopicId) -> int:
        with self._lock:
            if topic.name not in self._topics:
                raise UnknownTopic(topic.name)
            return len(self._subs[topic.name])

    # -- publishing and delivery -------------------------------------------

    def next_message_id(self) -> str:
        with self._lock:
            self._msg_seq += 1
            return f"m-{self._msg_seq}"

    def make_envelope(
        self,
        topic: TopicId,
        sender_id: str,
        payload: Payload,
        correlation_id: str,
        session_id: str = "",
    ) -> Envelope:
        return Envelope(
            message_id=self.next_message_id(),
            correlation_id=correlation_id,
            session_id=session_id,
            topic=topic,
            sender_id=sender_id,
            payload=payload,
            sent_at=self.clock.now_ms,
        )

    def publish(self, topic: TopicId, envelope: Envelope, delay_ms: int = 0) -> int:
        """Enqueue `envelope` for every current subscriber of `topic`.

        Returns the subscriber count at publish time; 0 means the envelope
        was dropped.
        """
        with self._lock:
            if topic.name not in self._topics:
                raise UnknownTopic(topic.name)
            if envelope.topic != topic:
                raise TopicMismatch(f"{envelope.topic.name} != {topic.name}")
            subs = list(self._subs[topic.name])
            deliver_at = self.clock.now_ms + max(0, delay_ms)
            for sub in subs:
                self._seq += 1
                heapq.heappush(self._pending, (deliver_at, self._seq, sub, envelope))
            return len(subs)

    def next_event_at(self) -> int | None:
        with self._lock:
            return self._pending[0][0] if self._pending else None

    def step(self, deadline_ms: int | None = None) -> bool:
        """Deliver the next pending envelope, advancing the clock to its
        scheduled time. Returns False when nothing is due by `deadline_ms`."""
        with self._lock:
            if not self._pending:
                return False
            at, _, sub, envelope = self._pending[0]
            if deadline_ms is not None and at > deadline_ms:
                return False
            heapq.heappop(self._pending)
            self.clock.advance_to(at)
            if not sub.active:
                return True
            self.delivery_log.append(
                Delivery(at_ms=at, topic=sub.topic, participant_id=sub.participant_id, envelope=envelope)
            )
            if sub.handler is None:
                sub.inbox.append(envelope)
                return True
            try:
                sub.handler(envelope)
            except Exception:
                # One misbehaving subscriber must not stall the pump.
                logger.exception("handler for %s failed on %s", sub.participant_id, envelope.message_id)
            return True

    def run_until_idle(self, deadline_ms: int | None = None) -> int:
        processed = 0
        while self.step(deadline_ms):
            processed += 1
        return processed
