"""Session, query-cache, feedback, user and routing stores.

Everything lives in memory on the hot path; `snapshot_all` writes one
line-delimited record file per store under a data directory and
`load_all` rebuilds from those files (feedback replay also restores agent
ratings in the registry).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from .clock import LogicalClock
from .embed import Embedding
from .model import AgentResponse, ContextSnapshot, Disposition, Rating
from .registry import Registry, UnknownAgent


class StoreError(Exception):
    pass


class UnknownSession(StoreError):
    pass


class UnsupportedChannel(StoreError):
    pass


class SessionNotActive(StoreError):
    pass


class SessionClosed(StoreError):
    pass


class InvalidTransition(StoreError):
    pass


class InvalidScore(StoreError):
    pass


class InvalidEntry(StoreError):
    pass


class SessionStatus(str, Enum):
    ACTIVE = "active"
    HANDED_OVER = "handed_over"
    CLOSED = "closed"


_ALLOWED_TRANSITIONS = {
    SessionStatus.ACTIVE: {SessionStatus.HANDED_OVER, SessionStatus.CLOSED},
    SessionStatus.HANDED_OVER: {SessionStatus.CLOSED},
    SessionStatus.CLOSED: set(),
}


@dataclass
class SessionRecord:
    session_id: str
    app_id: str
    user_id: str
    channel_id: str
    serving_agent_id: str | None = None
    context: ContextSnapshot = field(default_factory=ContextSnapshot)
    consecutive_oos: int = 0
    last_sentiment: float = 0.0
    status: SessionStatus = SessionStatus.ACTIVE
    created_at: int = 0
    updated_at: int = 0

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "app_id": self.app_id,
            "user_id": self.user_id,
            "channel_id": self.channel_id,
            "serving_agent_id": self.serving_agent_id,
            "context": self.context.to_dict(),
            "consecutive_oos": self.consecutive_oos,
            "last_sentiment": self.last_sentiment,
            "status": self.status.value,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionRecord":
        return cls(
            session_id=d["session_id"],
            app_id=d["app_id"],
            user_id=d["user_id"],
            channel_id=d["channel_id"],
            serving_agent_id=d.get("serving_agent_id"),
            context=ContextSnapshot.from_dict(d.get("context") or {}),
            consecutive_oos=d.get("consecutive_oos", 0),
            last_sentiment=d.get("last_sentiment", 0.0),
            status=SessionStatus(d.get("status", "active")),
            created_at=d.get("created_at", 0),
            updated_at=d.get("updated_at", 0),
        )


@dataclass
class QueryCacheEntry:
    query_id: str
    session_id: str
    utterance_stored: str
    embedding: Embedding
    strategy: str  # broadcast_only | search_and_multicast | direct_to_bound
    gathered: list[AgentResponse] = field(default_factory=list)
    selected_agent_id: str | None = None
    policy_used: str = ""

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "session_id": self.session_id,
            "utterance_stored": self.utterance_stored,
            "embedding": self.embedding.to_list(),
            "strategy": self.strategy,
            "gathered": [r.to_dict() for r in self.gathered],
            "selected_agent_id": self.selected_agent_id,
            "policy_used": self.policy_used,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QueryCacheEntry":
        return cls(
            query_id=d["query_id"],
            session_id=d["session_id"],
            utterance_stored=d["utterance_stored"],
            embedding=Embedding.from_list(d["embedding"]),
            strategy=d["strategy"],
            gathered=[AgentResponse.from_dict(r) for r in d.get("gathered") or []],
            selected_agent_id=d.get("selected_agent_id"),
            policy_used=d.get("policy_used", ""),
        )


@dataclass
class FeedbackRecord:
    session_id: str
    agent_id: str
    score: int
    comment: str = ""

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "agent_id": self.agent_id,
            "score": self.score,
            "comment": self.comment,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackRecord":
        return cls(d["session_id"], d["agent_id"], d["score"], d.get("comment", ""))


@dataclass
class RatingState:
    agent_id: str
    score_sum: int = 0
    sample_count: int = 0

    @property
    def mean_score(self) -> float:
        return self.score_sum / self.sample_count if self.sample_count else 0.0


# Fewer than this many samples keeps an agent at Beginner regardless of mean.
RATING_SAMPLE_FLOOR = 3


def rating_band(state: RatingState) -> Rating:
    if state.sample_count < RATING_SAMPLE_FLOOR:
        return Rating.BEGINNER
    mean = state.mean_score
    if mean < 2:
        return Rating.BEGINNER
    if mean < 3:
        return Rating.INTERMEDIATE
    if mean < 4:
        return Rating.PROFESSIONAL
    return Rating.EXPERT


@dataclass
class UserProfile:
    user_id: str
    channel_identities: dict[str, str] = field(default_factory=dict)
    persona_hint: str = ""

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "channel_identities": dict(self.channel_identities),
            "persona_hint": self.persona_hint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UserProfile":
        return cls(d["user_id"], dict(d.get("channel_identities") or {}), d.get("persona_hint", ""))


@dataclass
class RoutingRule:
    user_id: str
    preferred_agent_id: str
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "preferred_agent_id": self.preferred_agent_id,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoutingRule":
        return cls(d["user_id"], d["preferred_agent_id"], d.get("reason", ""))


Redactor = Callable[[str], tuple[str, list[str]]]


def _id_suffix(value: str) -> int:
    try:
        return int(value.rsplit("-", 1)[1])
    except (IndexError, ValueError):
        return 0


class Stores:
    """Facade over the five stores, sharing the clock and the registry."""

    def __init__(self, registry: Registry, clock: LogicalClock, redactor: Redactor | None = None) -> None:
        self._registry = registry
        self._clock = clock
        self._redactor = redactor
        self._sessions: dict[str, SessionRecord] = {}
        self._queries: list[QueryCacheEntry] = []
        self._queries_by_id: dict[str, QueryCacheEntry] = {}
        self._feedback: list[FeedbackRecord] = []
        self._ratings: dict[str, RatingState] = {}
        self._users: dict[str, UserProfile] = {}
        self._identity_index: dict[tuple[str, str], str] = {}
        self._routing: dict[str, RoutingRule] = {}
        self._session_seq = 0
        self._user_seq = 0
        self._query_seq = 0
        registry.add_deregistration_hook(self._on_agent_deregistered)

    # -- sessions ---------------------------------------------------------

    def open_session(self, app_id: str, user_id: str, channel_id: str) -> SessionRecord:
        app = self._registry.route_app(app_id)  # raises UnknownApp
        if channel_id not in app.channel_ids:
            raise UnsupportedChannel(channel_id)
        self._session_seq += 1
        now = self._clock.now_ms
        record = SessionRecord(
            session_id=f"s-{self._session_seq}",
            app_id=app_id,
            user_id=user_id,
            channel_id=channel_id,
            created_at=now,
            updated_at=now,
        )
        self._sessions[record.session_id] = record
        return record

    def session(self, session_id: str) -> SessionRecord:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def sessions(self) -> list[SessionRecord]:
        return list(self._sessions.values())

    def find_active_session(self, app_id: str, user_id: str) -> SessionRecord | None:
        for record in self._sessions.values():
            if record.app_id == app_id and record.user_id == user_id and record.status is not SessionStatus.CLOSED:
                return record
        return None

    def bind_serving_agent(self, session_id: str, agent_id: str) -> None:
        record = self.session(session_id)
        if record.status is not SessionStatus.ACTIVE:
            raise SessionNotActive(session_id)
        if not self._registry.is_registered(agent_id):
            raise UnknownAgent(agent_id)
        record.serving_agent_id = agent_id
        record.updated_at = self._clock.now_ms

    def unbind(self, session_id: str) -> None:
        record = self.session(session_id)
        record.serving_agent_id = None
        record.updated_at = self._clock.now_ms

    def set_status(self, session_id: str, status: SessionStatus) -> None:
        record = self.session(session_id)
        if status is record.status:
            return
        if status not in _ALLOWED_TRANSITIONS[record.status]:
            raise InvalidTransition(f"{record.status.value} -> {status.value}")
        record.status = status
        record.updated_at = self._clock.now_ms

    def close_session(self, session_id: str) -> None:
        self.set_status(session_id, SessionStatus.CLOSED)

    def merge_context(self, session_id: str, intents: list[str], entities: dict[str, str]) -> ContextSnapshot:
        record = self.session(session_id)
        record.context.merge(intents, entities)
        record.updated_at = self._clock.now_ms
        return record.context

    def update_sentiment(self, session_id: str, sentiment: float) -> None:
        record = self.session(session_id)
        record.last_sentiment = sentiment
        record.updated_at = self._clock.now_ms

    def reset_oos(self, session_id: str) -> None:
        self.session(session_id).consecutive_oos = 0

    def increment_oos(self, session_id: str) -> int:
        record = self.session(session_id)
        record.consecutive_oos += 1
        return record.consecutive_oos

    def _on_agent_deregistered(self, agent_id: str) -> None:
        for record in self._sessions.values():
            if record.serving_agent_id == agent_id and record.status is SessionStatus.ACTIVE:
                record.serving_agent_id = None
                record.updated_at = self._clock.now_ms
        for user_id, rule in list(self._routing.items()):
            if rule.preferred_agent_id == agent_id:
                del self._routing[user_id]

    # -- query cache --------------------------------------------------------

    def allocate_query_id(self) -> str:
        self._query_seq += 1
        return f"q-{self._query_seq}"

    def _validate_selected(self, entry: QueryCacheEntry) -> None:
        if entry.selected_agent_id is None:
            return
        for response in entry.gathered:
            if response.agent_id == entry.selected_agent_id and response.disposition is Disposition.IN_SCOPE:
                return
        raise InvalidEntry(f"selected agent {entry.selected_agent_id} has no in-scope gathered response")

    def log_query(self, entry: QueryCacheEntry) -> None:
        record = self.session(entry.session_id)
        app = self._registry.route_app(record.app_id)
        if app.data_classification == "sensitive" and self._redactor is not None:
            entry.utterance_stored = self._redactor(entry.utterance_stored)[0]
        self._validate_selected(entry)
        self._queries.append(entry)
        self._queries_by_id[entry.query_id] = entry

    def set_selected(self, query_id: str, agent_id: str) -> None:
        entry = self._queries_by_id[query_id]
        if entry.selected_agent_id is not None:
            raise InvalidEntry(f"winner already set for {query_id}")
        entry.selected_agent_id = agent_id
        self._validate_selected(entry)

    def get_queries(self, session_id: str) -> list[QueryCacheEntry]:
        self.session(session_id)
        return [e for e in self._queries if e.session_id == session_id]

    def all_queries(self) -> list[QueryCacheEntry]:
        return list(self._queries)

    # -- feedback -------------------------------------------------------------

    def record_feedback(self, record: FeedbackRecord) -> Rating:
        if not 1 <= record.score <= 5:
            raise InvalidScore(str(record.score))
        if not self._registry.is_registered(record.agent_id):
            raise UnknownAgent(record.agent_id)
        self._feedback.append(record)
        state = self._ratings.setdefault(record.agent_id, RatingState(record.agent_id))
        state.score_sum += record.score
        state.sample_count += 1
        rating = rating_band(state)
        self._registry.update_rating(record.agent_id, rating)
        return rating

    def rating_state(self, agent_id: str) -> RatingState:
        return self._ratings.get(agent_id, RatingState(agent_id))

    # -- users and routing -------------------------------------------------------

    def resolve_user(self, channel_id: str, channel_local_id: str) -> UserProfile:
        key = (channel_id, channel_local_id)
        user_id = self._identity_index.get(key)
        if user_id is not None:
            return self._users[user_id]
        self._user_seq += 1
        profile = UserProfile(user_id=f"u-{self._user_seq}", channel_identities={channel_id: channel_local_id})
        self._users[profile.user_id] = profile
        self._identity_index[key] = profile.user_id
        return profile

    def link_identity(self, user_id: str, channel_id: str, channel_local_id: str) -> None:
        profile = self._users[user_id]
        profile.channel_identities[channel_id] = channel_local_id
        self._identity_index[(channel_id, channel_local_id)] = user_id

    def user(self, user_id: str) -> UserProfile:
        return self._users[user_id]

    def find_user(self, user_id: str) -> UserProfile | None:
        return self._users.get(user_id)

    def set_routing_rule(self, user_id: str, preferred_agent_id: str, reason: str = "") -> None:
        self._routing[user_id] = RoutingRule(user_id, preferred_agent_id, reason)

    def routing_rule_for(self, user_id: str) -> RoutingRule | None:
        rule = self._routing.get(user_id)
        if rule is None or not self._registry.is_registered(rule.preferred_agent_id):
            return None
        return rule

    # -- persistence ----------------------------------------------------------

    _FILES = {
        "sessions": "sessions.jsonl",
        "query_cache": "query_cache.jsonl",
        "feedback": "feedback.jsonl",
        "users": "users.jsonl",
        "routing": "routing.jsonl",
    }

    def snapshot_all(self, data_dir: str | Path) -> None:
        base = Path(data_dir)
        base.mkdir(parents=True, exist_ok=True)
        self._write(base / self._FILES["sessions"], (s.to_dict() for s in self._sessions.values()))
        self._write(base / self._FILES["query_cache"], (q.to_dict() for q in self._queries))
        self._write(base / self._FILES["feedback"], (f.to_dict() for f in self._feedback))
        self._write(base / self._FILES["users"], (u.to_dict() for u in self._users.values()))
        self._write(base / self._FILES["routing"], (r.to_dict() for r in self._routing.values()))

    @staticmethod
    def _write(path: Path, records) -> None:
        with path.open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    @staticmethod
    def _read(path: Path) -> list[dict]:
        if not path.exists():
            return []
        with path.open("r", encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def load_all(self, data_dir: str | Path) -> None:
        base = Path(data_dir)
        self._sessions = {}
        for d in self._read(base / self._FILES["sessions"]):
            record = SessionRecord.from_dict(d)
            self._sessions[record.session_id] = record
            self._session_seq = max(self._session_seq, _id_suffix(record.session_id))
        self._queries = []
        self._queries_by_id = {}
        for d in self._read(base / self._FILES["query_cache"]):
            entry = QueryCacheEntry.from_dict(d)
            self._queries.append(entry)
            self._queries_by_id[entry.query_id] = entry
            self._query_seq = max(self._query_seq, _id_suffix(entry.query_id))
        self._feedback = []
        self._ratings = {}
        for d in self._read(base / self._FILES["feedback"]):
            record = FeedbackRecord.from_dict(d)
            self._feedback.append(record)
            state = self._ratings.setdefault(record.agent_id, RatingState(record.agent_id))
            state.score_sum += record.score
            state.sample_count += 1
        for agent_id, state in self._ratings.items():
            if self._registry.is_registered(agent_id):
                self._registry.update_rating(agent_id, rating_band(state))
        self._users = {}
        self._identity_index = {}
        for d in self._read(base / self._FILES["users"]):
            profile = UserProfile.from_dict(d)
            self._users[profile.user_id] = profile
            for channel_id, local in profile.channel_identities.items():
                self._identity_index[(channel_id, local)] = profile.user_id
            self._user_seq = max(self._user_seq, _id_suffix(profile.user_id))
        self._routing = {}
        for d in self._read(base / self._FILES["routing"]):
            rule = RoutingRule.from_dict(d)
            self._routing[rule.user_id] = rule
